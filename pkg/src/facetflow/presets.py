"""Closed-form problem data and test functions, selectable by name."""
from __future__ import annotations

import math

import numpy as np

from .diagnostics import TestFunction
from .elliptic import solve_poisson
from .grid import Grid, build_grid
from .stepper import ProblemData


def steady_unit(grid: Grid) -> ProblemData:
    """``u0 = |x|^2 / (2 dim)`` with ``b1 = 1``: ``Laplace u0 = 1``, so nothing moves."""
    u0 = sum(c * c for c in grid.coords) / (2.0 * grid.dim)
    ones = np.ones(grid.shape)
    return ProblemData(grid, u0.copy(), ones, 1.0, u0, ones)


def sine_1d(grid: Grid, base: float = 1.0, amp: float = 0.25) -> ProblemData:
    """``Laplace u0 = base + amp sin(pi x / L)`` on ``(0, L)``, ``b1 = base``."""
    if grid.dim != 1:
        raise ValueError("sine_1d is a 1D preset")
    L = grid.lengths[0]
    x = grid.coords[0]
    k = math.pi / L
    u0 = 0.5 * base * x * x - amp * np.sin(k * x) / (k * k)
    lap = base + amp * np.sin(k * x)
    c0 = min(base, base + amp)
    if not c0 > 0:
        raise ValueError(f"base + min(amp, 0) must be positive, got {c0}")
    b1 = np.full(grid.shape, float(base))
    return ProblemData(grid, u0.copy(), b1, c0, u0, lap)


def akw_1d(grid: Grid, facet_slope: float = 0.25, peak_slope: float = 1.0) -> ProblemData:
    """A single mound of the slope profile: ``rho0`` rises from ``facet_slope``
    at the walls to ``peak_slope`` in the middle (``rho = 1 / Laplace u``)."""
    if not (facet_slope > 0 and peak_slope > 0):
        raise ValueError("slopes must be positive")
    base = 1.0 / facet_slope
    return sine_1d(grid, base=base, amp=1.0 / peak_slope - base)


def slope_1d(grid: Grid, rho_b: float = 1.0, amp: float = 0.5) -> ProblemData:
    """Slope profile ``rho0^3 = rho_b^3 + amp sin(pi x / L)``.

    ``(rho0^3)''`` vanishes at both walls, so the data already satisfy the
    second boundary condition of the slope equation and the march has no
    initial boundary layer.  ``u0`` is the discrete solution of
    ``Laplace_h u0 = 1/rho0`` with ``u0 = 0`` on the boundary, which makes
    ``1 / Laplace_h u0`` equal ``rho0`` to solver precision.
    """
    if grid.dim != 1:
        raise ValueError("slope_1d is a 1D preset")
    if not (rho_b > 0 and rho_b**3 + min(amp, 0.0) > 0):
        raise ValueError("need rho_b > 0 and rho_b^3 + min(amp, 0) > 0")
    rho0 = slope_1d_rho0(grid, rho_b, amp)
    lap = 1.0 / rho0
    zero = np.zeros(grid.shape)
    u0 = solve_poisson(-lap, zero, grid).values
    return ProblemData(grid, zero, np.full(grid.shape, 1.0 / rho_b), float(lap.min()), u0, lap)


def slope_1d_rho0(grid: Grid, rho_b: float = 1.0, amp: float = 0.5) -> np.ndarray:
    x = grid.coords[0]
    cube = rho_b**3 + amp * np.sin(math.pi * x / grid.lengths[0])
    cube[0] = cube[-1] = rho_b**3
    return np.cbrt(cube)


DATA_PRESETS = {
    "steady_unit": steady_unit,
    "slope_1d": slope_1d,
    "sine_1d": sine_1d,
    "akw_1d": akw_1d,
}


def make_data(name: str, grid: Grid, **params) -> ProblemData:
    try:
        fn = DATA_PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown data preset {name!r}; choose from {sorted(DATA_PRESETS)}") from None
    return fn(grid, **params)


# ---------------------------------------------------------------------------
# test functions (time independent; lengths taken from the grid)


def parabola(grid: Grid) -> TestFunction:
    """``xi = prod_a x_a (L_a - x_a)``."""
    Ls = grid.lengths

    def xi(*a):
        out = 1.0
        for c, L in zip(a[:-1], Ls):
            out = out * c * (L - c)
        return out

    def grad(*a):
        cs = a[:-1]
        out = []
        for i, L in enumerate(Ls):
            p = L - 2 * cs[i]
            for j, (c, M) in enumerate(zip(cs, Ls)):
                if j != i:
                    p = p * c * (M - c)
            out.append(p)
        return tuple(out)

    def lap(*a):
        cs = a[:-1]
        total = 0.0
        for i in range(len(Ls)):
            p = -2.0
            for j, (c, M) in enumerate(zip(cs, Ls)):
                if j != i:
                    p = p * c * (M - c)
            total = total + p
        return total

    return TestFunction(xi, grad, lap, name="parabola")


def sine_squared(grid: Grid) -> TestFunction:
    """``xi = prod_a sin^2(pi x_a / L_a)``."""
    ks = [math.pi / L for L in grid.lengths]

    def xi(*a):
        out = 1.0
        for c, k in zip(a[:-1], ks):
            out = out * np.sin(k * c) ** 2
        return out

    def factors(cs):
        s2 = [np.sin(k * c) ** 2 for c, k in zip(cs, ks)]
        d1 = [k * np.sin(2 * k * c) for c, k in zip(cs, ks)]
        d2 = [2 * k * k * np.cos(2 * k * c) for c, k in zip(cs, ks)]
        return s2, d1, d2

    def grad(*a):
        s2, d1, _ = factors(a[:-1])
        out = []
        for i in range(len(ks)):
            p = d1[i]
            for j in range(len(ks)):
                if j != i:
                    p = p * s2[j]
            out.append(p)
        return tuple(out)

    def lap(*a):
        s2, _, d2 = factors(a[:-1])
        total = 0.0
        for i in range(len(ks)):
            p = d2[i]
            for j in range(len(ks)):
                if j != i:
                    p = p * s2[j]
            total = total + p
        return total

    return TestFunction(xi, grad, lap, name="sine_squared")


def zero(grid: Grid) -> TestFunction:
    z = lambda *a: np.zeros_like(a[0])  # noqa: E731
    return TestFunction(z, lambda *a: tuple(np.zeros_like(a[0]) for _ in a[:-1]), z, name="zero")


TEST_FUNCTIONS = {"parabola": parabola, "sine_squared": sine_squared, "zero": zero}


def make_test_function(name: str, grid: Grid) -> TestFunction:
    try:
        return TEST_FUNCTIONS[name](grid)
    except KeyError:
        raise ValueError(f"unknown test function {name!r}; choose from {sorted(TEST_FUNCTIONS)}") from None


def elliptic_mms(cells: int) -> tuple[Grid, np.ndarray, np.ndarray]:
    """Manufactured problem ``-u'' + u = (pi^2 + 1) sin(pi x)`` on ``(0, 1)``.

    Returns ``(grid, rhs, exact)``.
    """
    g = build_grid(1, [1.0], [cells])
    x = g.coords[0]
    return g, (math.pi**2 + 1) * np.sin(math.pi * x), np.sin(math.pi * x)
