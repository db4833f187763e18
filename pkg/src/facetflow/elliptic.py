"""Dirichlet solves for ``-div(a grad u) + c u = f`` on a uniform grid.

Boundary values are eliminated into the right-hand side, so the interior
system stays symmetric positive definite.  1D systems are tridiagonal and
solved directly; 2D systems go through matrix-free conjugate gradients.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import kernels
from .grid import Grid, ScalarField, values_of

log = logging.getLogger(__name__)


class LinearSolveError(RuntimeError):
    """A linear solve missed its residual contract."""

    def __init__(self, message: str, residual: float, iterations: int = 0):
        super().__init__(f"{message} (residual {residual:.3e} after {iterations} iterations)")
        self.residual = residual
        self.iterations = iterations


@dataclass(frozen=True)
class LinearSolveConfig:
    method: str = "auto"  # "auto" | "direct" | "cg"
    cg_rel_tol: float = 1e-12
    cg_max_iter: int | None = None  # default 10 * unknowns
    jacobi: bool = False

    def __post_init__(self):
        if self.method not in ("auto", "direct", "cg"):
            raise ValueError(f"unknown linear method {self.method!r}")
        if not self.cg_rel_tol > 0:
            raise ValueError("cg_rel_tol must be positive")
        if self.cg_max_iter is not None and self.cg_max_iter < 1:
            raise ValueError("cg_max_iter must be positive")


def arithmetic_edges(a: np.ndarray, grid: Grid) -> list[np.ndarray]:
    a = np.asarray(a, dtype=float).reshape(grid.shape)
    out = []
    for axis in range(grid.dim):
        lo = [slice(None)] * grid.dim
        hi = [slice(None)] * grid.dim
        lo[axis] = slice(None, -1)
        hi[axis] = slice(1, None)
        out.append(0.5 * (a[tuple(lo)] + a[tuple(hi)]))
    return out


@dataclass(frozen=True, eq=False)
class EllipticOperator:
    """``-div(a grad .) + c .`` with positive coefficient ``a`` and ``c >= 0``.

    ``edges`` overrides the default arithmetic-mean edge coefficients; it is
    one array per axis, shaped like ``numpy.diff(nodes, axis=axis)``.
    """

    grid: Grid
    coefficient: np.ndarray | None = None
    reaction: float = 0.0
    edges: tuple[np.ndarray, ...] | None = None

    def __post_init__(self):
        if not (np.isfinite(self.reaction) and self.reaction >= 0):
            raise ValueError(f"reaction must be >= 0, got {self.reaction}")
        if self.edges is None:
            a = np.ones(self.grid.shape) if self.coefficient is None else values_of(self.coefficient)
            a = np.asarray(a, dtype=float).reshape(self.grid.shape)
            if not np.all(np.isfinite(a)) or np.any(a <= 0):
                raise ValueError("coefficient must be finite and strictly positive at every node")
            edges = tuple(arithmetic_edges(a, self.grid))
        else:
            edges = tuple(np.asarray(e, dtype=float) for e in self.edges)
            for axis, e in enumerate(edges):
                want = list(self.grid.shape)
                want[axis] -= 1
                if e.shape != tuple(want):
                    raise ValueError(f"edge array {axis} has shape {e.shape}, expected {tuple(want)}")
                if not np.all(np.isfinite(e)) or np.any(e <= 0):
                    raise ValueError("edge coefficients must be finite and strictly positive")
        object.__setattr__(self, "edges", edges)

    @property
    def unknowns(self) -> int:
        return int(np.prod([n - 1 for n in self.grid.cells]))

    def apply(self, v: np.ndarray) -> np.ndarray:
        """Operator applied to a full node array; returns the interior block."""
        return apply_full(self.grid, self.edges, self.reaction, v)

    def norm_inf(self) -> float:
        """Row-sum norm of the interior matrix (upper bound)."""
        g = self.grid
        total = np.full(tuple(n - 1 for n in g.cells), float(self.reaction))
        for axis, (e, h) in enumerate(zip(self.edges, g.spacing)):
            lo, hi = _edge_pair(g, axis)
            total = total + 2.0 * (e[lo] + e[hi]) / (h * h)
        return float(total.max())


@dataclass(frozen=True, eq=False)
class EllipticSolution:
    field: ScalarField
    residual: float
    iterations: int

    @property
    def values(self) -> np.ndarray:
        return self.field.values


def _edge_pair(grid: Grid, axis: int):
    """Slices picking, for every interior node, its lower/upper edge along ``axis``."""
    lo = [slice(1, -1)] * grid.dim
    hi = [slice(1, -1)] * grid.dim
    lo[axis] = slice(None, -1)
    hi[axis] = slice(1, None)
    return tuple(lo), tuple(hi)


def apply_full(grid: Grid, edges, reaction: float, v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=float).reshape(grid.shape)
    out = reaction * v[grid.interior]
    for axis, (e, h) in enumerate(zip(edges, grid.spacing)):
        flux = e * np.diff(v, axis=axis) / h
        lo, hi = _edge_pair(grid, axis)
        out = out - (flux[hi] - flux[lo]) / h
    return out


def assemble_interior(op: EllipticOperator) -> sp.csr_matrix:
    """Sparse interior matrix; symmetry is checked exactly."""
    grid = op.grid
    inner = tuple(n - 1 for n in grid.cells)
    m = int(np.prod(inner))
    idx = np.arange(m).reshape(inner)
    rows, cols, vals = [], [], []
    diag = np.full(inner, float(op.reaction))
    for axis, (e, h) in enumerate(zip(op.edges, grid.spacing)):
        lo, hi = _edge_pair(grid, axis)
        diag = diag + (e[lo] + e[hi]) / (h * h)
        # coupling between interior neighbours along axis
        sel = [slice(1, -1)] * grid.dim
        sel[axis] = slice(1, -1)
        coup = -e[tuple(sel)] / (h * h)
        a_lo = [slice(None)] * grid.dim
        a_hi = [slice(None)] * grid.dim
        a_lo[axis] = slice(None, -1)
        a_hi[axis] = slice(1, None)
        i0 = idx[tuple(a_lo)].ravel()
        i1 = idx[tuple(a_hi)].ravel()
        rows += [i0, i1]
        cols += [i1, i0]
        vals += [coup.ravel(), coup.ravel()]
    rows.append(idx.ravel())
    cols.append(idx.ravel())
    vals.append(diag.ravel())
    A = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(m, m))
    asym = abs(A - A.T).max() if m else 0.0
    if asym != 0.0:
        raise AssertionError(f"assembled operator is not symmetric (max asymmetry {asym})")
    return A


def lifted_rhs(op: EllipticOperator, rhs: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Interior right-hand side after eliminating the boundary values ``g``."""
    grid = op.grid
    ext = np.where(grid.boundary_mask, np.asarray(g, dtype=float).reshape(grid.shape), 0.0)
    return np.asarray(rhs, dtype=float).reshape(grid.shape)[grid.interior] - op.apply(ext)


def _scale(rhs_int, g, anorm, u) -> float:
    return float(np.max(np.abs(rhs_int), initial=0.0) + np.max(np.abs(g), initial=0.0) + 1.0
                 + anorm * np.max(np.abs(u), initial=0.0))


def solve_dirichlet_array(op: EllipticOperator, rhs, g, config: LinearSolveConfig | None = None,
                          x0=None) -> tuple[np.ndarray, float, int]:
    """Array-level solve.  Returns ``(u, residual, iterations)``.

    ``rhs`` is read on interior nodes, ``g`` on boundary nodes; ``x0`` is an
    optional full-node initial guess for CG.
    """
    config = config or LinearSolveConfig()
    grid = op.grid
    rhs = np.asarray(rhs, dtype=float).reshape(grid.shape)
    g = np.asarray(g, dtype=float).reshape(grid.shape)
    gb = g[grid.boundary_mask]
    if not np.all(np.isfinite(gb)):
        raise ValueError("boundary data must be finite")
    rhs_int = rhs[grid.interior]
    b = lifted_rhs(op, rhs, g)
    anorm = op.norm_inf()
    method = config.method
    if method == "auto":
        method = "direct" if grid.dim == 1 else "cg"
    u = g.copy()
    iters = 0
    if method == "direct":
        if grid.dim == 1:
            e = op.edges[0]
            h2 = grid.spacing[0] ** 2
            diag = (e[:-1] + e[1:]) / h2 + op.reaction
            off = -e[1:-1] / h2
            u[1:-1] = kernels.tridiag_solve(off, diag, off, b)
        else:
            from scipy.sparse.linalg import spsolve

            u[grid.interior] = spsolve(assemble_interior(op).tocsc(), b.ravel()).reshape(b.shape)
        iters = 1
    else:
        if grid.dim != 2:
            raise ValueError("the CG path is implemented for 2D grids")
        ex, ey = op.edges
        hx, hy = grid.spacing
        maxit = config.cg_max_iter or 10 * op.unknowns
        x = np.zeros_like(b) if x0 is None else np.asarray(x0, dtype=float).reshape(grid.shape)[grid.interior]
        base = float(np.max(np.abs(rhs_int), initial=0.0) + np.max(np.abs(gb), initial=0.0) + 1.0)
        while True:
            # the recursive residual drifts; restart from the true one until the contract holds
            x, it = kernels.cg_5pt(ex, ey, op.reaction, hx * hx, hy * hy, b, x,
                                   config.cg_rel_tol, base, anorm, maxit - iters, config.jacobi)
            iters += it
            u[grid.interior] = x
            res = float(np.max(np.abs(op.apply(u) - rhs_int), initial=0.0))
            if res <= config.cg_rel_tol * _scale(rhs_int, gb, anorm, u):
                break
            if iters >= maxit or it == 0:
                raise LinearSolveError("conjugate gradients did not converge", res, iters)
    res = float(np.max(np.abs(op.apply(u) - rhs_int), initial=0.0))
    if not np.isfinite(res) or res > config.cg_rel_tol * _scale(rhs_int, gb, anorm, u):
        raise LinearSolveError("linear solve missed its residual contract", res, iters)
    return u, res, iters


def solve_dirichlet(op: EllipticOperator, rhs, g, config: LinearSolveConfig | None = None) -> EllipticSolution:
    """Solve ``-div(a grad u) + c u = rhs`` with ``u = g`` on the boundary.

    The returned solution equals ``g`` on boundary nodes and carries the
    achieved interior residual (max norm).
    """
    u, res, it = solve_dirichlet_array(op, values_of(rhs), values_of(g), config)
    return EllipticSolution(ScalarField(op.grid, u), res, it)


def solve_poisson(rhs, g, grid: Grid | None = None, config: LinearSolveConfig | None = None) -> EllipticSolution:
    """``-Laplace u = rhs`` with ``u = g`` on the boundary."""
    if grid is None:
        grid = rhs.grid if isinstance(rhs, ScalarField) else g.grid
    return solve_dirichlet(EllipticOperator(grid), rhs, g, config)
