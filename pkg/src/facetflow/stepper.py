"""Implicit time stepping for ``u_t = Laplace (Laplace u)^-3``.

Writing ``Laplace u = exp(-psi)`` turns each implicit step of size ``tau``
into two coupled second-order problems on the interior nodes::

    (u - u_prev)/tau - Laplace exp(3 psi) + tau psi = 0
    Laplace u = exp(-psi)
    u = b0,  psi = -ln b1                       on the boundary

and ``rho = exp(psi) = 1 / Laplace u`` is positive by construction.  The
pair is solved by iterating the map ``g -> B(g)`` (a Poisson solve for ``u``
followed by a linear solve for ``psi`` with frozen coefficient
``3 exp(3 g)``), damped and Anderson-mixed, with continuation in the
scaling parameter ``sigma`` as a fallback.
"""
from __future__ import annotations

import logging
import math
import sys
from dataclasses import dataclass, field, replace

import numpy as np

from .elliptic import EllipticOperator, LinearSolveConfig, LinearSolveError, solve_dirichlet_array, solve_poisson
from .grid import Grid, ScalarField, laplacian_interior, smooth, values_of

log = logging.getLogger(__name__)

LOG_MAX = math.log(sys.float_info.max)
COMPAT_RTOL = 1e-8
MAX_BACKTRACK = 30


class ValidationError(ValueError):
    """Problem data violates one of the hypotheses (H1)-(H3) or compatibility."""

    def __init__(self, invariant: str, message: str):
        super().__init__(f"{invariant}: {message}")
        self.invariant = invariant
        self.detail = message


class StepFailure(RuntimeError):
    """The nonlinear step did not converge."""

    def __init__(self, message: str, k: int | None = None, residual_history=()):
        self.k = k
        self.residual_history = list(residual_history)
        last = self.residual_history[-1] if self.residual_history else float("nan")
        where = "" if k is None else f" at step {k}"
        super().__init__(f"{message}{where} (last residual {last:.3e})")


# ---------------------------------------------------------------------------
# data and configuration


@dataclass(frozen=True, eq=False)
class ProblemData:
    """Boundary data ``b0``, ``b1 >= c0`` and initial surface ``u0``.

    ``lap_u0`` carries the exact Laplacian of ``u0`` at the boundary nodes
    (full nodal array; interior entries are ignored).  It is needed for the
    compatibility check ``b1 = Laplace u0`` on the boundary, which the
    discrete stencil cannot evaluate there.
    """

    grid: Grid
    b0: np.ndarray
    b1: np.ndarray
    c0: float
    u0: np.ndarray
    lap_u0: np.ndarray

    def __post_init__(self):
        g = self.grid
        for name in ("b0", "b1", "u0", "lap_u0"):
            v = np.array(values_of(getattr(self, name)), dtype=float)
            if v.size != g.node_count:
                raise ValidationError("H1", f"{name} has {v.size} values, expected {g.node_count}")
            v = v.reshape(g.shape)
            if name == "lap_u0":
                bad = ~np.isfinite(v) & g.boundary_mask
            else:
                bad = ~np.isfinite(v)
            if bad.any():
                raise ValidationError("H1", f"{name} is not finite at node {int(np.flatnonzero(bad)[0])}")
            v.flags.writeable = False
            object.__setattr__(self, name, v)
        self.validate()

    def validate(self):
        g = self.grid
        if not (np.isfinite(self.c0) and self.c0 > 0):
            raise ValidationError("H2", f"floor c0 must be positive, got {self.c0}")
        low = self.b1 < self.c0
        if low.any():
            node = int(np.flatnonzero(low)[0])
            raise ValidationError("H2", f"floor violated at node {node} (b1={self.b1.flat[node]:.6g} < c0={self.c0:.6g})")
        lap = laplacian_interior(self.u0, g)
        low = lap < self.c0 * (1.0 - COMPAT_RTOL)
        if low.any():
            loc = tuple(int(i) + 1 for i in np.unravel_index(int(np.flatnonzero(low)[0]), lap.shape))
            node = int(np.ravel_multi_index(loc, g.shape))
            raise ValidationError("H3", f"discrete Laplacian of u0 below c0 at node {node} ({lap[low][0]:.6g} < {self.c0:.6g})")
        tol = COMPAT_RTOL * (1.0 + float(np.max(np.abs(self.b1))))
        bm = g.boundary_mask
        gap = np.abs(self.b1 - self.lap_u0)[bm]
        if gap.max() > tol:
            node = int(np.flatnonzero(bm)[int(np.argmax(gap))])
            raise ValidationError("compatibility", f"b1 != Laplace u0 at boundary node {node} (gap {gap.max():.3e})")
        gap = np.abs(self.b0 - self.u0)[bm]
        scale = COMPAT_RTOL * (1.0 + float(np.max(np.abs(self.b0))))
        if gap.max() > scale:
            node = int(np.flatnonzero(bm)[int(np.argmax(gap))])
            raise ValidationError("compatibility", f"u0 != b0 at boundary node {node} (gap {gap.max():.3e})")

    def smoothed(self, passes: int) -> "ProblemData":
        """Discrete mollification of the initial surface; revalidated.

        The nodal Laplacian of ``u0`` is averaged (boundary entries held at
        ``b1``) and ``u0`` is rebuilt by a Poisson solve with the same boundary
        values.  Averaging is a convex combination, so the floor ``c0`` and
        the boundary data survive unchanged.
        """
        if passes <= 0:
            return self
        g = self.grid
        lap = np.where(g.boundary_mask, self.lap_u0, 0.0)
        lap[g.interior] = laplacian_interior(self.u0, g)
        u0 = solve_poisson(-smooth(lap, g, passes), self.u0, g).values
        return ProblemData(g, self.b0, self.b1, self.c0, u0, self.lap_u0)

    @property
    def psi_boundary(self) -> np.ndarray:
        return -np.log(self.b1)


@dataclass(frozen=True)
class StepperConfig:
    tau: float = 0.01
    omega: float = 0.5
    fp_tol: float = 1e-10
    fp_max_iter: int = 200
    homotopy_stages: int = 1
    smoothing_passes: int = 0
    anderson_depth: int = 5
    linear: LinearSolveConfig = field(default_factory=LinearSolveConfig)

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError("tau must be positive")
        if not 0 < self.omega <= 1:
            raise ValueError("omega must lie in (0, 1]")
        if not self.fp_tol > 0 or self.fp_max_iter < 1:
            raise ValueError("fp_tol and fp_max_iter must be positive")
        if self.homotopy_stages < 1 or self.smoothing_passes < 0 or self.anderson_depth < 0:
            raise ValueError("homotopy_stages >= 1, smoothing_passes >= 0, anderson_depth >= 0 required")


@dataclass(frozen=True, eq=False)
class StepState:
    k: int
    u: ScalarField
    psi: ScalarField
    rho: ScalarField
    residual: float
    iters: int
    homotopy: bool = False


@dataclass(frozen=True, eq=False)
class Trajectory:
    data: ProblemData
    tau: float
    states: tuple[StepState, ...]

    @property
    def j(self) -> int:
        return len(self.states) - 1

    @property
    def T(self) -> float:
        return self.tau * self.j

    @property
    def grid(self) -> Grid:
        return self.data.grid

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.j + 1) * self.tau

    def stack(self, name: str) -> np.ndarray:
        """Array of shape ``(j+1, *grid.shape)`` for ``u``, ``psi`` or ``rho``."""
        return np.stack([getattr(s, name).values for s in self.states])


# ---------------------------------------------------------------------------
# the fixed-point map


def secant_edges(g: np.ndarray, grid: Grid) -> list[np.ndarray]:
    """Edge coefficients ``(exp(3 g_b) - exp(3 g_a)) / (g_b - g_a)``.

    With these, ``div(a grad psi)`` evaluated at ``psi = g`` equals the
    5-point Laplacian of ``exp(3 psi)`` exactly, so fixed points of the map
    solve the discrete system itself.  Computed as
    ``3 exp(3m) sinh(3d/2)/(3d/2)`` to stay accurate for small ``d``.
    """
    out = []
    for axis in range(grid.dim):
        lo = [slice(None)] * grid.dim
        hi = [slice(None)] * grid.dim
        lo[axis] = slice(None, -1)
        hi[axis] = slice(1, None)
        a, b = g[tuple(lo)], g[tuple(hi)]
        x = 1.5 * (b - a)
        small = np.abs(x) < 1e-4
        xs = np.where(small, 1.0, x)
        shc = np.where(small, 1.0 + x * x / 6.0, np.sinh(xs) / xs)
        out.append(3.0 * np.exp(1.5 * (a + b)) * shc)
    return out


def step_residual(u, psi, u_prev, data: ProblemData, tau: float, sigma: float = 1.0) -> float:
    """Max-norm residual of the coupled step system on interior nodes."""
    g = data.grid
    u = np.asarray(u).reshape(g.shape)
    psi = np.asarray(psi).reshape(g.shape)
    u_prev = np.asarray(u_prev).reshape(g.shape)
    inner = g.interior
    r1 = sigma * (u - u_prev)[inner] / tau - laplacian_interior(np.exp(3.0 * psi), g) + tau * psi[inner]
    r2 = laplacian_interior(u, g) - np.exp(-psi[inner])
    return float(max(np.max(np.abs(r1), initial=0.0), np.max(np.abs(r2), initial=0.0)))


def _tightened(linear: LinearSolveConfig, op: EllipticOperator, rhs, g, x, target: float | None):
    """CG settings whose residual contract sits below the absolute ``target``.

    The CG contract is relative to ``|rhs| + |g| + 1 + |A| |u|``; near a
    fixed point that can exceed the nonlinear tolerance, which would leave the
    coupled residual stuck above ``fp_tol``.  Direct solves are left alone.
    """
    if target is None or (linear.method != "cg" and op.grid.dim == 1):
        return linear
    scale = (float(np.max(np.abs(rhs))) + float(np.max(np.abs(g))) + 1.0
             + op.norm_inf() * max(float(np.max(np.abs(x))), float(np.max(np.abs(g))), 1.0))
    rel = min(linear.cg_rel_tol, max(target / scale, 64 * np.finfo(float).eps))
    return replace(linear, cg_rel_tol=rel) if rel < linear.cg_rel_tol else linear


def _map_B(g_psi, u_prev, data, tau, sigma, linear, u_guess=None, target=None):
    grid = data.grid
    if np.max(3.0 * g_psi) > LOG_MAX / 2:
        raise FloatingPointError("exp(3 g) would overflow; iterate left the admissible box")
    poisson = EllipticOperator(grid)
    rhs = -np.exp(-g_psi)
    guess = u_prev if u_guess is None else u_guess
    lin = _tightened(linear, poisson, rhs, data.b0, guess, target)
    u, _, _ = solve_dirichlet_array(poisson, rhs, data.b0, lin, x0=u_guess)
    op = EllipticOperator(grid, reaction=tau, edges=tuple(secant_edges(g_psi, grid)))
    rhs = -sigma * (u - u_prev) / tau
    lin = _tightened(linear, op, rhs, sigma * data.psi_boundary, g_psi, target)
    psi, _, _ = solve_dirichlet_array(op, rhs, sigma * data.psi_boundary, lin, x0=g_psi)
    return u, psi


def picard_map_B(g, u_prev, data: ProblemData, tau: float, sigma: float = 1.0,
                 linear: LinearSolveConfig | None = None) -> tuple[ScalarField, ScalarField]:
    """One application of the fixed-point map.

    Solves ``-Laplace u = -exp(-g)``, ``u = b0``, then
    ``-div(3 exp(3g) grad psi) + tau psi = -sigma (u - u_prev)/tau`` with
    ``psi = -sigma ln b1``.  Returns ``(u, psi)``.
    """
    if not 0 < sigma <= 1:
        raise ValueError("sigma must lie in (0, 1]")
    grid = data.grid
    gv = np.asarray(values_of(g), dtype=float).reshape(grid.shape)
    if not np.all(np.isfinite(gv)):
        raise ValueError("g must be finite")
    u, psi = _map_B(gv, values_of(u_prev).reshape(grid.shape), data, tau, sigma, linear or LinearSolveConfig())
    return ScalarField(grid, u), ScalarField(grid, psi)


def psi_box_bounds(data: ProblemData, u_prev, u_computed, tau: float) -> tuple[float, float]:
    """Sub/supersolution constants ``(M, L)`` with ``-M <= psi <= L``.

    ``M = max((|u_prev| + |b0|)/tau^2, (ln |b1|)^+)`` and
    ``L = max(|u - u_prev|/tau^2, (ln c0)^-)``, all norms in max-norm.
    """
    up = values_of(u_prev)
    uc = values_of(u_computed)
    b0n = float(np.max(np.abs(data.b0)))
    b1n = float(np.max(np.abs(data.b1)))
    M = max((float(np.max(np.abs(up))) + b0n) / tau**2, max(math.log(b1n), 0.0))
    L = max(float(np.max(np.abs(uc - up))) / tau**2, max(-math.log(data.c0), 0.0))
    return M, L


def _guard_box(data: ProblemData, u_prev: np.ndarray, tau: float) -> tuple[float, float]:
    b0n = float(np.max(np.abs(data.b0)))
    upn = float(np.max(np.abs(u_prev)))
    M = 2.0 * max((upn + b0n) / tau**2, max(math.log(float(np.max(data.b1))), 0.0))
    L = 2.0 * max((b0n + upn) / tau**2, max(-math.log(data.c0), 0.0))
    return -min(M, LOG_MAX / 2), min(L, LOG_MAX / 6)


def _evaluate(psi, u_prev, data, cfg: StepperConfig, sigma, u_guess):
    """Map value and coupled residual at ``psi``; ``res = inf`` if the map blows up."""
    try:
        with np.errstate(over="raise", invalid="raise"):
            u, b = _map_B(psi, u_prev, data, cfg.tau, sigma, cfg.linear, u_guess=u_guess, target=0.01 * cfg.fp_tol)
            res = step_residual(u, psi, u_prev, data, cfg.tau, sigma)
    except (FloatingPointError, ArithmeticError, np.linalg.LinAlgError, LinearSolveError):
        return None, None, math.inf
    return u, b, res


def _iterate(psi, u_prev, data, cfg: StepperConfig, sigma, history):
    """Damped, Anderson-mixed iteration of the map at fixed ``sigma``.

    A step at which the map cannot be evaluated (overflow) is halved, and
    the mixing history dropped, up to ``MAX_BACKTRACK`` times.  The residual
    itself is allowed to rise between iterates: limiting its growth makes the
    iteration stall far more often than it helps.  Returns ``(u, psi, converged, iters)``;
    ``history`` collects residuals of accepted iterates.
    """
    grid = data.grid
    lo, hi = _guard_box(data, u_prev, cfg.tau)
    inner = grid.interior
    psi = np.clip(psi, lo, hi)
    psi[grid.boundary_mask] = (sigma * data.psi_boundary)[grid.boundary_mask]
    X: list[np.ndarray] = []
    F: list[np.ndarray] = []
    u, b, res = _evaluate(psi, u_prev, data, cfg, sigma, None)
    if not np.isfinite(res):
        raise FloatingPointError("the map cannot be evaluated at the starting iterate")
    for it in range(cfg.fp_max_iter + 1):
        history.append(res)
        if res < cfg.fp_tol:
            return u, psi, True, it
        if it == cfg.fp_max_iter:
            break
        f = (b - psi)[inner].ravel()
        x = psi[inner].ravel()
        step = cfg.omega * f
        if cfg.anderson_depth > 0:
            X.append(x.copy())
            F.append(f.copy())
            if len(X) > cfg.anderson_depth + 1:
                X.pop(0)
                F.pop(0)
            if len(X) > 1:
                dF = np.diff(np.array(F), axis=0).T
                dX = np.diff(np.array(X), axis=0).T
                gamma = np.linalg.lstsq(dF, f, rcond=None)[0]
                mixed = cfg.omega * f - (dX + cfg.omega * dF) @ gamma
                if np.all(np.isfinite(mixed)):
                    step = mixed
        theta = 1.0
        for _ in range(MAX_BACKTRACK + 1):
            cand = psi.copy()
            cand[inner] = np.clip(x + theta * step, lo, hi).reshape(psi[inner].shape)
            u_c, b_c, res_c = _evaluate(cand, u_prev, data, cfg, sigma, u)
            if np.isfinite(res_c):
                break
            theta *= 0.5
            X.clear()
            F.clear()
        else:
            return u, psi, False, it
        psi, u, b, res = cand, u_c, b_c, res_c
    return u, psi, False, cfg.fp_max_iter


def _solve_step_arrays(u_prev, psi_start, data, cfg: StepperConfig, k=None):
    history: list[float] = []
    bm = data.grid.boundary_mask
    if np.array_equal(u_prev[bm], data.b0[bm]) and np.array_equal(psi_start[bm], data.psi_boundary[bm]):
        # the warm start may already solve the step (steady data); keep it bit for bit
        res0 = step_residual(u_prev, psi_start, u_prev, data, cfg.tau)
        if res0 < cfg.fp_tol:
            return u_prev.copy(), psi_start.copy(), res0, 0, False
    try:
        u, psi, ok, iters = _iterate(psi_start.copy(), u_prev, data, cfg, 1.0, history)
    except (FloatingPointError, ArithmeticError, np.linalg.LinAlgError) as exc:
        log.debug("step %s: plain iteration aborted: %s", k, exc)
        ok, iters = False, len(history)
    homotopy = False
    if not ok and cfg.homotopy_stages > 1:
        log.info("step %s: restarting with %d-stage sigma continuation", k, cfg.homotopy_stages)
        homotopy = True
        psi = psi_start.copy()
        iters = 0
        for s in range(1, cfg.homotopy_stages + 1):
            sigma = s / cfg.homotopy_stages
            try:
                u, psi, ok, n = _iterate(psi, u_prev, data, cfg, sigma, history)
            except (FloatingPointError, ArithmeticError, np.linalg.LinAlgError) as exc:
                log.debug("step %s: sigma=%g aborted: %s", k, sigma, exc)
                ok = False
            iters += n
            if not ok:
                break
    if not ok:
        raise StepFailure("fixed-point iteration did not converge", k, history)
    return u, psi, history[-1], iters, homotopy


def initial_state(data: ProblemData) -> StepState:
    """State 0: ``u0`` and ``psi0 = -ln Laplace_h u0`` (boundary ``-ln b1``)."""
    g = data.grid
    psi = data.psi_boundary.copy()
    lap = laplacian_interior(data.u0, g)
    psi[g.interior] = -np.log(lap)
    res = float(np.max(np.abs(lap - np.exp(-psi[g.interior])), initial=0.0))
    return StepState(0, ScalarField(g, data.u0), ScalarField(g, psi), ScalarField(g, np.exp(psi)), res, 0)


def _check_state(u, psi, u_prev, data, tau, k):
    g = data.grid
    M, L = psi_box_bounds(data, u_prev, u, tau)
    if psi.min() < -M or psi.max() > L:
        raise StepFailure(f"converged psi leaves the box [-{M:.3g}, {L:.3g}]", k, [])
    bm = g.boundary_mask
    if not (np.array_equal(u[bm], data.b0[bm]) and np.array_equal(psi[bm], data.psi_boundary[bm])):
        raise StepFailure("boundary values not imposed exactly", k, [])


def solve_step(u_prev, data: ProblemData, cfg: StepperConfig, psi_prev=None, k: int | None = None) -> StepState:
    """Advance one implicit step from ``u_prev``.

    ``psi_prev`` warm-starts the iteration (default: ``-ln max(Laplace_h u_prev, c0)``).
    Convergence is declared on the residual of the coupled system, never on
    iterate differences.
    """
    g = data.grid
    up = np.asarray(values_of(u_prev), dtype=float).reshape(g.shape)
    if not np.all(np.isfinite(up)):
        raise ValueError("u_prev must be finite")
    if psi_prev is None:
        psi0 = data.psi_boundary.copy()
        lap = laplacian_interior(up, g)
        psi0[g.interior] = -np.log(np.maximum(lap, data.c0))
    else:
        psi0 = np.array(values_of(psi_prev), dtype=float).reshape(g.shape)
    u, psi, res, iters, homotopy = _solve_step_arrays(up, psi0, data, cfg, k)
    _check_state(u, psi, up, data, cfg.tau, k)
    kk = 0 if k is None else k
    return StepState(kk, ScalarField(g, u), ScalarField(g, psi), ScalarField(g, np.exp(psi)), res, iters, homotopy)


def run_rothe(data: ProblemData, T: float, j: int, cfg: StepperConfig | None = None,
              callback=None) -> Trajectory:
    """March ``j`` implicit steps of size ``tau = T/j`` from ``u0``.

    ``callback(state)`` is called after each state is produced, including
    state 0.
    """
    if not T > 0 or int(j) != j or j < 1:
        raise ValueError("need T > 0 and integer j >= 1")
    cfg = replace(cfg or StepperConfig(), tau=T / j)
    data = data.smoothed(cfg.smoothing_passes)
    states = [initial_state(data)]
    if callback is not None:
        callback(states[0])
    for k in range(1, j + 1):
        prev = states[-1]
        st = solve_step(prev.u, data, cfg, psi_prev=prev.psi, k=k)
        log.debug("step %d: residual %.2e after %d iterations", k, st.residual, st.iters)
        states.append(st)
        if callback is not None:
            callback(st)
    return Trajectory(data, cfg.tau, tuple(states))


# ---------------------------------------------------------------------------
# interpolants in time


def interval_index(traj: Trajectory, t: float) -> int:
    """``k`` with ``t`` in ``(t_{k-1}, t_k]``; 0 for ``t = 0``."""
    if not (-1e-12 * traj.T <= t <= traj.T * (1 + 1e-12)):
        raise ValueError(f"t={t} outside [0, {traj.T}]")
    if t <= 0:
        return 0
    return int(min(max(math.ceil(t / traj.tau - 1e-9), 1), traj.j))


def interpolants_on_interval(traj: Trajectory, k: int, t: float) -> dict[str, np.ndarray]:
    """Interpolant formulas on interval ``k`` evaluated at ``t`` (no range check)."""
    s1 = traj.states[k]
    s0 = traj.states[k - 1]
    tk = k * traj.tau
    a = (t - (tk - traj.tau)) / traj.tau
    b = (tk - t) / traj.tau
    return {
        "u_tilde": a * s1.u.values + b * s0.u.values,
        "u_bar": s1.u.values.copy(),
        "psi_bar": s1.psi.values.copy(),
        "rho_tilde": a * s1.rho.values + b * s0.rho.values,
        "rho_bar": s1.rho.values.copy(),
        "rho3_tilde": a * s1.rho.values**3 + b * s0.rho.values**3,
    }


def eval_interpolants(traj: Trajectory, t: float) -> dict[str, np.ndarray]:
    """Piecewise-linear (``*_tilde``) and piecewise-constant (``*_bar``) values at ``t``."""
    k = interval_index(traj, t)
    if k == 0:
        s = traj.states[0]
        return {
            "u_tilde": s.u.values.copy(), "u_bar": s.u.values.copy(), "psi_bar": s.psi.values.copy(),
            "rho_tilde": s.rho.values.copy(), "rho_bar": s.rho.values.copy(),
            "rho3_tilde": s.rho.values**3,
        }
    return interpolants_on_interval(traj, k, t)
