"""Direct 1D solver for the slope equation ``rho_t + rho^2 (rho^3)'''' = 0``.

Boundary conditions are ``rho = rho_b`` and ``(rho^3)'' = 0`` at both ends.
The second condition is imposed through ghost values
``w_{-1} = 2 w_0 - w_1`` (and symmetrically on the right), which closes the
5-point fourth difference on every interior node.

Each step solves for the increment ``d = rho_{n+1} - rho_n`` with ``rho^3``
linearized about ``rho_n``::

    d + dt rho_n^2 D4(3 rho_n^2 d) = -dt rho_n^2 D4(rho_n^3)

so an exact equilibrium (``rho^3`` affine) produces a zero right-hand side
and stays put to round-off.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_banded

from .grid import Grid, laplacian_interior, values_of
from .stepper import Trajectory, interval_index


class PositivityLoss(RuntimeError):
    def __init__(self, level: int, value: float):
        super().__init__(f"rho lost positivity at time level {level} (min {value:.3e})")
        self.level = level
        self.value = value


@dataclass(frozen=True, eq=False)
class RhoTrajectory:
    grid: Grid
    dt: float
    states: list[np.ndarray]
    boundary: tuple[float, float]
    defects: list[float] = field(default_factory=list)

    @property
    def times(self) -> np.ndarray:
        return np.arange(len(self.states)) * self.dt

    @property
    def T(self) -> float:
        return self.dt * (len(self.states) - 1)

    def at(self, t: float) -> np.ndarray:
        """State ``n`` with ``t`` in ``(t_{n-1}, t_n]`` (state 0 at ``t = 0``)."""
        n = 0 if t <= 0 else int(min(max(math.ceil(t / self.dt - 1e-9), 1), len(self.states) - 1))
        return self.states[n]


def _cube(w: np.ndarray) -> np.ndarray:
    # explicit product: numpy's power is not bitwise odd for negative bases
    return w * w * w


def fourth_difference(w: np.ndarray, h: float) -> np.ndarray:
    """5-point fourth difference on interior nodes with ``w'' = 0`` ghosts."""
    ext = np.concatenate([[2 * w[0] - w[1]], w, [2 * w[-1] - w[-2]]])
    return (ext[:-4] - 4 * ext[1:-3] + 6 * ext[2:-2] - 4 * ext[3:-1] + ext[4:]) / h**4


def ghost_second_differences(w: np.ndarray, h: float) -> tuple[float, float]:
    """Second differences at the two boundary nodes using the ghost values."""
    gl = 2 * w[0] - w[1]
    gr = 2 * w[-1] - w[-2]
    return (gl - 2 * w[0] + w[1]) / h**2, (w[-2] - 2 * w[-1] + gr) / h**2


def _d4_interior_bands(m: int) -> np.ndarray:
    """Bands of the interior block of the ghost-closed fourth difference (times h^4).

    Row ``r`` holds the diagonal ``2 - r`` places above the main one (``solve_banded`` layout).
    """
    ab = np.zeros((5, m))
    ab[0, 2:] = 1.0
    ab[1, 1:] = -4.0
    ab[2, :] = 6.0
    ab[3, :-1] = -4.0
    ab[4, :-2] = 1.0
    ab[2, 0] = 5.0
    ab[2, -1] = 5.0
    return ab


def solve_rho_1d(rho0, rho_b, T: float, n_steps: int, grid: Grid, check_positivity: bool = True) -> RhoTrajectory:
    """Semi-implicit march over ``[0, T]`` with ``n_steps`` equal steps."""
    if grid.dim != 1 or grid.cells[0] < 4:
        raise ValueError("need a 1D grid with at least 5 nodes")
    if not T > 0 or n_steps < 1:
        raise ValueError("need T > 0 and n_steps >= 1")
    rho = np.array(values_of(rho0), dtype=float).reshape(grid.shape)
    rl, rr = float(rho_b[0]), float(rho_b[1])
    if check_positivity and (rl <= 0 or rr <= 0 or np.any(rho <= 0)):
        raise ValueError("rho0 and rho_b must be positive")
    for end, rb in ((0, rl), (-1, rr)):
        if abs(rho[end] - rb) > 1e-8 * (1 + abs(rb)):
            raise ValueError(f"rho0 at the boundary ({rho[end]}) does not match rho_b ({rb})")
        rho[end] = rb
    h = grid.spacing[0]
    dt = T / n_steps
    m = grid.cells[0] - 1
    base = _d4_interior_bands(m)
    offsets = np.arange(2, -3, -1)  # band row r holds offset (2 - r) above the diagonal
    states = [rho.copy()]
    defects: list[float] = []
    for n in range(1, n_steps + 1):
        r2 = rho[1:-1] ** 2
        coef = dt / h**4
        ab = np.empty_like(base)
        for r, off in enumerate(offsets):
            # entry A[i, j] with j - i = off sits at ab[r, j]
            j = np.arange(m)
            i = j - off
            ok = (i >= 0) & (i < m)
            ab[r] = 0.0
            ab[r, ok] = coef * r2[i[ok]] * base[r, ok] * 3.0 * r2[ok]
        ab[2] += 1.0
        rhs = -dt * r2 * fourth_difference(_cube(rho), h)
        d = solve_banded((2, 2), ab, rhs, check_finite=False)
        new = rho.copy()
        new[1:-1] += d
        if not np.all(np.isfinite(new)):
            raise FloatingPointError(f"non-finite rho at time level {n}")
        if check_positivity and new.min() <= 0:
            raise PositivityLoss(n, float(new.min()))
        defect = (new[1:-1] - rho[1:-1]) / dt + new[1:-1] ** 2 * fourth_difference(_cube(new), h)
        defects.append(float(np.max(np.abs(defect))))
        rho = new
        states.append(rho.copy())
    return RhoTrajectory(grid, dt, states, (rl, rr), defects)


@dataclass(frozen=True)
class CrossValidationRow:
    t: float
    err_direct: float  # |rho_bar from u - rho_direct|_inf
    err_identity: float  # |1/Laplace_h u_bar - rho_bar|_inf (interior)
    rho_max: float


def cross_validate(traj: Trajectory, rho_traj: RhoTrajectory, times) -> list[CrossValidationRow]:
    """Compare the slope from the height march with the direct slope march."""
    g = traj.grid
    if g != rho_traj.grid:
        raise ValueError(f"grid mismatch: {g} vs {rho_traj.grid}")
    b1 = traj.data.b1
    for val, end in ((rho_traj.boundary[0], 0), (rho_traj.boundary[1], -1)):
        if abs(val - 1.0 / b1[end]) > 1e-8 * (1 + abs(val)):
            raise ValueError("rho_b does not match 1/b1 at the boundary")
    rho0 = 1.0 / laplacian_interior(traj.data.u0, g)
    if np.max(np.abs(rho0 - rho_traj.states[0][1:-1])) > 1e-8 * (1 + np.max(np.abs(rho0))):
        raise ValueError("rho0 does not match 1/Laplace_h u0")
    rows = []
    for t in times:
        k = interval_index(traj, t)
        st = traj.states[k]
        rb = st.rho.values
        direct = rho_traj.at(t)
        ident = 1.0 / laplacian_interior(st.u.values, g) - rb[1:-1]
        rows.append(CrossValidationRow(float(t), float(np.max(np.abs(rb - direct))),
                                       float(np.max(np.abs(ident))), float(rb.max())))
    return rows
