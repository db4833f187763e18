"""A priori functionals, weak residuals and interpolant checks for a trajectory.

Every bound the analysis asserts with an unspecified constant is turned into
something checkable: either an exact discrete identity (interpolant gaps,
the summation-by-parts form of the weak residual) or a quantity whose
boundedness can be compared across refinements.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import kernels
from .grid import Grid, dirichlet_energy, gradient_energy, integrate, laplacian_interior
from .stepper import Trajectory, interpolants_on_interval, psi_box_bounds

_EPS = np.finfo(float).eps


# ---------------------------------------------------------------------------
# a priori series


@dataclass(frozen=True, eq=False)
class DiagnosticsReport:
    """Per-step series, index ``k = 0..j``.  ``cum_*`` entries are running time integrals."""

    tau: float
    series: dict[str, np.ndarray]

    COLUMNS = (
        "t", "energy", "mass_exp", "cum_lap_exp3psi_sq", "cum_tau_exp3psi_gradpsi_sq",
        "grad_u_sq", "cum_grad_rho_sq", "cum_neg_psi_term", "dtu_sq", "cum_dtrho_sq",
        "cum_dissipation", "min_rho", "box_M", "box_L", "margin_lower", "margin_upper",
        "residual", "iters",
    )
    CUMULATIVE = tuple(c for c in COLUMNS if c.startswith("cum_"))

    def __getitem__(self, name: str) -> np.ndarray:
        return self.series[name]

    def __len__(self) -> int:
        return len(self.series["t"])

    def rows(self):
        for i in range(len(self)):
            yield [self.series[c][i] for c in self.COLUMNS]


def boundary_fill_q(traj: Trajectory, k: int) -> np.ndarray:
    """``Laplace_h exp(3 psi_k)`` on interior nodes, extended to the boundary.

    On boundary nodes the step equation gives the value
    ``(u_k - u_{k-1})/tau + tau psi_k``, which is what the scheme implicitly
    uses as the boundary trace of ``Laplace rho^3``.
    """
    g = traj.grid
    s = traj.states[k]
    q = np.empty(g.shape)
    q[g.interior] = laplacian_interior(np.exp(3.0 * s.psi.values), g)
    bm = g.boundary_mask
    if k == 0:
        q[bm] = 0.0
    else:
        du = (s.u.values - traj.states[k - 1].u.values) / traj.tau
        q[bm] = du[bm] + traj.tau * s.psi.values[bm]
    return q


def apriori_report(traj: Trajectory) -> DiagnosticsReport:
    """Evaluate the functionals bounded by the discrete energy estimates."""
    g = traj.grid
    tau = traj.tau
    n = traj.j + 1
    out = {c: np.zeros(n) for c in DiagnosticsReport.COLUMNS}
    out["t"] = traj.times.astype(float)
    running = {c: 0.0 for c in DiagnosticsReport.CUMULATIVE}
    for k, s in enumerate(traj.states):
        psi, u, rho = s.psi.values, s.u.values, s.rho.values
        out["energy"][k] = dirichlet_energy(u, g)
        out["mass_exp"][k] = integrate(np.exp(2 * psi) + np.exp(-psi), g)
        out["grad_u_sq"][k] = gradient_energy(u, g)
        out["min_rho"][k] = float(rho.min())
        out["residual"][k] = s.residual
        out["iters"][k] = s.iters
        if k > 0:
            prev = traj.states[k - 1]
            q = boundary_fill_q(traj, k)
            neg = np.where(psi <= 0, psi * np.exp(-psi), 0.0)
            drho = (rho - prev.rho.values) / tau
            running["cum_lap_exp3psi_sq"] += tau * integrate(q * q, g)
            running["cum_tau_exp3psi_gradpsi_sq"] += tau * tau * gradient_energy(psi, g, weight=np.exp(3 * psi))
            running["cum_grad_rho_sq"] += tau * gradient_energy(rho, g)
            running["cum_neg_psi_term"] += -tau * tau * integrate(neg, g)
            running["cum_dtrho_sq"] += tau * integrate(drho * drho, g)
            running["cum_dissipation"] += 3.0 * tau * gradient_energy(rho, g)
            out["dtu_sq"][k] = integrate(((u - prev.u.values) / tau) ** 2, g)
            M, L = psi_box_bounds(traj.data, prev.u, s.u, tau)
            out["box_M"][k] = M
            out["box_L"][k] = L
            out["margin_lower"][k] = float(psi.min()) + M
            out["margin_upper"][k] = L - float(psi.max())
        for c in DiagnosticsReport.CUMULATIVE:
            out[c][k] = running[c]
    return DiagnosticsReport(tau, out)


def apriori_quantities(report: DiagnosticsReport) -> dict[str, float]:
    """Scalar left-hand sides of the three discrete a priori estimates.

    Covers the exponential mass and the dissipation of ``exp(3 psi)``, the
    height and slope gradients, and the time derivatives.
    ``energy_dissipation`` is ``max_k E(u_k) + sum 3 tau |grad rho|^2``.
    """
    s = report.series
    return {
        "mass_exp": float(s["mass_exp"].max()),
        "lap_exp3psi_sq": float(s["cum_lap_exp3psi_sq"][-1]),
        "tau_exp3psi_gradpsi_sq": float(s["cum_tau_exp3psi_gradpsi_sq"][-1]),
        "grad_u_sq": float(s["grad_u_sq"].max()),
        "grad_rho_sq": float(s["cum_grad_rho_sq"][-1]),
        "neg_psi_term": float(s["cum_neg_psi_term"][-1]),
        "dtu_sq": float(s["dtu_sq"][1:].max()) if len(s["dtu_sq"]) > 1 else 0.0,
        "dtrho_sq": float(s["cum_dtrho_sq"][-1]),
        "energy_dissipation": float(np.max(s["energy"] + s["cum_dissipation"])),
    }


# ---------------------------------------------------------------------------
# test functions and weak residuals


@dataclass(frozen=True)
class TestFunction:
    """Closed-form ``xi(x.., t)`` with analytic gradient and Laplacian.

    ``xi``, ``lap`` take ``(*coords, t)`` and return arrays; ``grad`` returns
    one array per axis.
    """

    __test__ = False  # keep pytest from collecting this class

    xi: Callable
    grad: Callable
    lap: Callable
    name: str = "xi"
    vanishes_on_lateral_boundary: bool = True
    nonnegative: bool = True

    def sample(self, grid: Grid, t: float):
        c = grid.coords
        v = np.broadcast_to(np.asarray(self.xi(*c, t), dtype=float), grid.shape)
        gr = [np.broadcast_to(np.asarray(a, dtype=float), grid.shape) for a in self.grad(*c, t)]
        lp = np.broadcast_to(np.asarray(self.lap(*c, t), dtype=float), grid.shape)
        return v, gr, lp

    def check(self, grid: Grid, times) -> None:
        """Raise ``ValueError`` if a declared flag fails on the sample nodes."""
        if not self.vanishes_on_lateral_boundary:
            raise ValueError(f"{self.name}: test functions must vanish on the lateral boundary")
        for t in times:
            v = np.broadcast_to(np.asarray(self.xi(*grid.coords, t), dtype=float), grid.shape)
            scale = 1e-12 * (1.0 + float(np.max(np.abs(v))))
            if np.max(np.abs(v[grid.boundary_mask])) > scale:
                raise ValueError(f"{self.name}: does not vanish on the boundary at t={t}")
            if self.nonnegative and v.min() < -scale:
                raise ValueError(f"{self.name}: declared nonnegative but min is {v.min():.3e} at t={t}")

    def __add__(self, other: "TestFunction") -> "TestFunction":
        return TestFunction(
            lambda *a: self.xi(*a) + other.xi(*a),
            lambda *a: tuple(p + q for p, q in zip(self.grad(*a), other.grad(*a))),
            lambda *a: self.lap(*a) + other.lap(*a),
            name=f"{self.name}+{other.name}",
            nonnegative=self.nonnegative and other.nonnegative,
        )


@dataclass(frozen=True)
class WeakResidual:
    """Discrete weak-form left-hand side and its certificate.

    ``value`` uses analytic derivatives of ``xi``; ``discrete_value`` is the
    same expression with grid derivatives of ``xi``, for which the step
    equations give the exact identity

        discrete_value = -dissipation + tau_terms

    with ``dissipation >= 0`` whenever ``xi >= 0``.  ``tol_slack`` is
    ``max(tau_terms, 0) + |value - discrete_value|``, plus a round-off
    allowance, so ``value <= tol_slack`` is a theorem about the scheme.
    """

    mode: str
    value: float
    tol_slack: float
    components: dict[str, float] = field(default_factory=dict)

    @property
    def satisfied(self) -> bool:
        return self.value <= self.tol_slack


def _central_gradients(w: np.ndarray, grid: Grid) -> list[np.ndarray]:
    out = []
    for axis, h in enumerate(grid.spacing):
        c = [slice(1, -1)] * grid.dim
        lo = list(c)
        hi = list(c)
        lo[axis] = slice(None, -2)
        hi[axis] = slice(2, None)
        out.append((w[tuple(hi)] - w[tuple(lo)]) / (2 * h))
    return out


def _cross_term(w: np.ndarray, xi: np.ndarray, grid: Grid) -> np.ndarray:
    """``Laplace_h(w xi) - w Laplace_h xi - xi Laplace_h w`` on interior nodes."""
    out = np.zeros(tuple(n - 1 for n in grid.cells))
    for axis, h in enumerate(grid.spacing):
        c = [slice(1, -1)] * grid.dim
        lo = list(c)
        hi = list(c)
        lo[axis] = slice(None, -2)
        hi[axis] = slice(2, None)
        wc, xc = w[tuple(c)], xi[tuple(c)]
        out += ((w[tuple(hi)] - wc) * (xi[tuple(hi)] - xc) + (w[tuple(lo)] - wc) * (xi[tuple(lo)] - xc)) / (h * h)
    return out


def weak_residual(traj: Trajectory, xi: TestFunction, mode: str = "inequality_thm12") -> WeakResidual:
    """Left-hand side of the weak slope equation against ``xi``.

    Evaluates, with the rectangle rule in time (``xi`` taken at ``t_k``),

        sum_k tau int [ d_t rho~ rho_k xi + q_k^2 xi
                        + 2 q_k grad rho_k^3 . grad xi + rho_k^3 q_k Lap xi ]

    where ``q_k = Laplace_h rho_k^3``.  ``mode`` is ``"equality_def12"``
    (just the value) or ``"inequality_thm12"`` (also requires ``xi >= 0``).
    """
    if mode not in ("equality_def12", "inequality_thm12"):
        raise ValueError(f"unknown mode {mode!r}")
    if mode == "inequality_thm12" and not xi.nonnegative:
        raise ValueError("the inequality needs a nonnegative test function")
    g = traj.grid
    tau = traj.tau
    inner = g.interior
    xi.check(g, traj.times)
    vol = g.cell_volume
    total_an = total_disc = diss = bterm = tpsi = solver = mag = 0.0
    e2_prev = laplacian_interior(traj.states[0].u.values, g) - 1.0 / traj.states[0].rho.values[inner]
    for k in range(1, traj.j + 1):
        s, p = traj.states[k], traj.states[k - 1]
        t = k * tau
        xv, xg, xl = xi.sample(g, t)
        rho, rho_p = s.rho.values, p.rho.values
        w = rho * rho * rho
        q = boundary_fill_q(traj, k)
        qi, wi, xii, ri, rpi = q[inner], w[inner], xv[inner], rho[inner], rho_p[inner]
        dtr = (ri - rpi) / tau
        grads = _central_gradients(w, g)
        grad_dot = sum(gw * gx[inner] for gw, gx in zip(grads, xg))
        an = dtr * ri * xii + qi * qi * xii + 2.0 * qi * grad_dot + wi * qi * xl[inner]
        disc = dtr * ri * xii + qi * qi * xii + qi * _cross_term(w, xv, g) + wi * qi * laplacian_interior(xv, g)
        total_an += tau * vol * float(np.sum(an))
        total_disc += tau * vol * float(np.sum(disc))
        mag += tau * vol * float(np.sum(np.abs(an)) + np.sum(np.abs(disc)))
        # pieces of the exact identity
        diss += tau * vol * float(np.sum(ri * (ri - rpi) ** 2 / (rpi * tau) * xii))
        qb = np.where(g.boundary_mask, q, 0.0)
        bterm += tau * vol * float(np.sum(laplacian_interior(qb, g) * wi * xii))
        tpsi += tau * vol * float(np.sum(tau * laplacian_interior(s.psi.values, g) * wi * xii))
        e1 = (s.u.values - p.u.values) / tau - q + tau * s.psi.values
        e2 = laplacian_interior(s.u.values, g) - 1.0 / ri
        defect = laplacian_interior(e1, g) - (e2 - e2_prev) / tau
        solver += tau * vol * float(np.sum(-defect * wi * xii))
        e2_prev = e2
    tau_terms = -bterm + tpsi + solver
    gap = abs(total_an - total_disc)
    roundoff = 64 * _EPS * (mag + abs(diss) + abs(bterm) + abs(tpsi))
    slack = max(tau_terms, 0.0) + gap + roundoff
    comps = {
        "discrete_value": total_disc,
        "dissipation": diss,
        "boundary_term": bterm,
        "tau_psi_term": tpsi,
        "solver_term": solver,
        "tau_terms": tau_terms,
        "xi_gap": gap,
        "identity_defect": total_disc + diss - tau_terms,
    }
    return WeakResidual(mode, float(total_an), float(slack), comps)


# ---------------------------------------------------------------------------
# Hoelder modulus


def holder_modulus(x, t, f, alpha_x: float = 0.5, alpha_t: float = 0.25) -> float:
    """``sup |f_i - f_j| / (|x_i - x_j|^alpha_x + |t_i - t_j|^alpha_t)`` over sample pairs."""
    x = np.ascontiguousarray(x, dtype=float).ravel()
    t = np.ascontiguousarray(t, dtype=float).ravel()
    f = np.ascontiguousarray(f, dtype=float).ravel()
    if not (x.size == t.size == f.size):
        raise ValueError("x, t and f must have the same length")
    if x.size < 2:
        raise ValueError("need at least two samples")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(t)) and np.all(np.isfinite(f))):
        raise ValueError("samples must be finite")
    sup, conflict = kernels.holder_sup(x, t, f, float(alpha_x), float(alpha_t))
    if conflict >= 0:
        raise ValueError(f"sample {conflict} repeats a point with a different value")
    return float(sup)


def cubic_interpolant_samples(traj: Trajectory, substeps: int = 1):
    """Samples ``(x, t, c~)`` of the interpolant of ``rho^3`` (1D only).

    Each interval is sampled at ``substeps + 1`` equally spaced times; shared
    endpoints are taken once.
    """
    g = traj.grid
    if g.dim != 1:
        raise ValueError("Hoelder sampling is 1D only")
    x = g.axes()[0]
    cubes = traj.stack("rho") ** 3
    ts, vals = [0.0], [cubes[0]]
    for k in range(1, traj.j + 1):
        for m in range(1, substeps + 1):
            a = m / substeps
            ts.append((k - 1 + a) * traj.tau)
            vals.append(a * cubes[k] + (1 - a) * cubes[k - 1])
    X, Tm = np.meshgrid(x, np.asarray(ts), indexing="xy")
    return X.ravel(), Tm.ravel(), np.asarray(vals).ravel()


def sobolev_scale(traj: Trajectory) -> float:
    """``||d_t c~||_{L2(Omega_T)} + sup_t ||c~||_{W^{2,2}}`` for the cubic interpolant (1D)."""
    g = traj.grid
    cubes = traj.stack("rho") ** 3
    dt2 = sum(traj.tau * integrate(((cubes[k] - cubes[k - 1]) / traj.tau) ** 2, g) for k in range(1, traj.j + 1))
    w22 = 0.0
    for k, c in enumerate(cubes):
        lap = np.zeros(g.shape)
        lap[g.interior] = laplacian_interior(c, g)
        lap[0], lap[-1] = lap[1], lap[-2]
        norm = integrate(c * c, g) + gradient_energy(c, g) + integrate(lap * lap, g)
        w22 = max(w22, math.sqrt(norm))
    return math.sqrt(dt2) + w22


# ---------------------------------------------------------------------------
# elementary inequalities


@dataclass(frozen=True)
class InequalityCheck:
    holds: bool
    lhs: float | np.ndarray
    rhs: float | np.ndarray


def _lemma21_sides(case: str, args: dict):
    if case == "L1":
        x = np.asarray(args["x"], dtype=float)
        y = np.asarray(args["y"], dtype=float)
        lhs = np.sum(x * (x - y), axis=-1)
        rhs = 0.5 * (np.sum(x * x, axis=-1) - np.sum(y * y, axis=-1))
        scale = np.sum(x * x + np.abs(x * y) + y * y, axis=-1)
        return lhs, rhs, scale, ">="
    if case == "L2":
        f, F = args["f"], args["F"]
        s = np.asarray(args["s"], dtype=float)
        t = np.asarray(args["t"], dtype=float)
        lhs = f(s) * (s - t)
        rhs = F(s) - F(t)
        scale = np.abs(f(s) * s) + np.abs(f(s) * t) + np.abs(F(s)) + np.abs(F(t))
        return lhs, rhs, scale, (">=" if args.get("increasing", True) else "<=")
    if case == "L3":
        s = np.asarray(args["s"], dtype=float)
        t = np.asarray(args["t"], dtype=float)
        lhs = (np.exp(-s) - np.exp(-t)) * np.exp(3 * s)
        rhs = -0.5 * (np.exp(2 * s) - np.exp(2 * t))
        scale = np.exp(2 * s) + np.exp(-t + 3 * s) + np.exp(2 * t)
        return lhs, rhs, scale, "<="
    if case == "L4":
        a = np.asarray(args["a"], dtype=float)
        b = np.asarray(args["b"], dtype=float)
        if np.any(a <= 0) or np.any(b <= 0):
            raise ValueError("L4 needs a, b > 0")
        lhs = (a**3 - b**3) * (1 / a - 1 / b)
        rhs = -3.0 * (a - b) ** 2
        scale = (a**3 + b**3) * (1 / a + 1 / b)
        return lhs, rhs, scale, "<="
    raise ValueError(f"unknown case {case!r}")


def check_lemma21(case: str, **args) -> InequalityCheck:
    """Evaluate both sides of one of the elementary inequalities (L1)-(L4).

    Arguments are arrays (broadcast elementwise; for L1 the last axis is the
    vector axis).  A comparison passes if it holds up to a few ulps of the
    magnitudes being combined, so cancellation in floating point cannot fake
    a counterexample.
    """
    lhs, rhs, scale, op = _lemma21_sides(case, args)
    tol = 16 * _EPS * scale
    ok = lhs >= rhs - tol if op == ">=" else lhs <= rhs + tol
    holds = bool(np.all(ok))
    if np.ndim(lhs) == 0:
        return InequalityCheck(holds, float(lhs), float(rhs))
    return InequalityCheck(holds, lhs, rhs)


def lemma21_suite(rng: np.random.Generator, n: int = 100_000) -> dict[str, int]:
    """Random property suite; returns the number of failing samples per case."""
    fails = {}
    bad = 0
    for d in (1, 2, 3, 4):
        x = rng.normal(scale=10.0, size=(n, d))
        y = rng.normal(scale=10.0, size=(n, d))
        lhs, rhs, scale, _ = _lemma21_sides("L1", {"x": x, "y": y})
        bad += int(np.sum(lhs < rhs - 16 * _EPS * scale))
    fails["L1"] = bad
    s = rng.uniform(-5, 5, n)
    t = rng.uniform(-5, 5, n)
    bad = 0
    for f, F, inc in ((np.exp, np.exp, True), (lambda v: v**3, lambda v: v**4 / 4, True),
                      (np.arctan, lambda v: v * np.arctan(v) - 0.5 * np.log1p(v * v), True),
                      (lambda v: -np.exp(v), lambda v: -np.exp(v), False)):
        lhs, rhs, scale, op = _lemma21_sides("L2", {"f": f, "F": F, "s": s, "t": t, "increasing": inc})
        tol = 16 * _EPS * scale
        bad += int(np.sum(lhs < rhs - tol) if op == ">=" else np.sum(lhs > rhs + tol))
    fails["L2"] = bad
    s = rng.uniform(-20, 20, n)
    t = rng.uniform(-20, 20, n)
    lhs, rhs, scale, _ = _lemma21_sides("L3", {"s": s, "t": t})
    fails["L3"] = int(np.sum(lhs > rhs + 16 * _EPS * scale))
    a = np.exp(rng.uniform(math.log(1e-6), math.log(1e3), n))
    b = np.exp(rng.uniform(math.log(1e-6), math.log(1e3), n))
    lhs, rhs, scale, _ = _lemma21_sides("L4", {"a": a, "b": b})
    fails["L4"] = int(np.sum(lhs > rhs + 16 * _EPS * scale))
    return fails


# ---------------------------------------------------------------------------
# interpolant gaps


@dataclass(frozen=True, eq=False)
class InterpolantGapReport:
    """Gaps between the piecewise-linear and piecewise-constant interpolants.

    ``uls_*`` are per interval, measured at the left end ``t -> t_{k-1}^+``
    where the gap is largest: ``||u~ - u_bar||_2`` against
    ``tau ||d_t u~||_2``.  ``rls_lhs`` is ``int int |rho~ - rho_bar|^2``
    by 2-point Gauss in time; ``rls_rhs`` is ``tau^2 int int (d_t rho~)^2``.
    The exact relation is ``rls_lhs = rls_rhs / 3``.  ``cubic_gap`` is
    ``sup |c~ - rho_bar^3|`` and ``cubic_bound = C tau^(1/4)``.
    """

    uls_lhs: np.ndarray
    uls_rhs: np.ndarray
    rls_lhs: float
    rls_rhs: float
    cubic_gap: float
    cubic_bound: float
    holder_constant: float
    rls_floor: float = 0.0  # rounding allowance of the quadrature, ~ (eps rho)^2 T |Omega|

    @property
    def uls_ok(self) -> bool:
        return bool(np.all(self.uls_lhs <= self.uls_rhs * (1 + 1e-12) + 1e-300))

    @property
    def uls_excess(self) -> float:
        """Largest relative excess of ``uls_lhs`` over ``uls_rhs`` (<= 0 when the bound holds strictly)."""
        if self.uls_lhs.size == 0:
            return 0.0
        rhs = np.where(self.uls_rhs > 0, self.uls_rhs, 1.0)
        return float(np.max((self.uls_lhs - self.uls_rhs) / rhs))

    @property
    def rls_ok(self) -> bool:
        return self.rls_lhs <= self.rls_rhs * (1 + 1e-12) + self.rls_floor

    @property
    def rls_identity_error(self) -> float:
        """Relative deviation from ``rls_lhs = rls_rhs / 3``."""
        if self.rls_rhs == 0:
            return 0.0 if self.rls_lhs <= self.rls_floor else math.inf
        return max(abs(self.rls_lhs - self.rls_rhs / 3) - self.rls_floor, 0.0) / (self.rls_rhs / 3)

    @property
    def cubic_ok(self) -> bool:
        return self.cubic_gap <= self.cubic_bound


def _l2(v, g):
    return math.sqrt(max(integrate(v * v, g), 0.0))


def interpolant_gap_report(traj: Trajectory, holder_constant: float | None = None) -> InterpolantGapReport:
    """Check the interpolant gap relations on every interval.

    ``holder_constant`` is the constant ``C`` in ``|c~ - rho_bar^3| <= C tau^(1/4)``;
    by default it is the Hoelder modulus of the sampled cubic interpolant
    (1D), which certifies the bound sample by sample.
    """
    g = traj.grid
    tau = traj.tau
    uls_l, uls_r = [], []
    rls_l = rls_r = floor = 0.0
    gauss = (0.5 - 0.5 / math.sqrt(3), 0.5 + 0.5 / math.sqrt(3))
    cubes = traj.stack("rho") ** 3
    for k in range(1, traj.j + 1):
        t0 = (k - 1) * tau
        # left limit of u~ - u_bar, taken exactly rather than through rounded weights
        du = traj.states[k].u.values - traj.states[k - 1].u.values
        uls_l.append(_l2(-du, g))
        uls_r.append(tau * _l2(du / tau, g))
        for node in gauss:
            ipg = interpolants_on_interval(traj, k, t0 + node * tau)
            d = ipg["rho_tilde"] - ipg["rho_bar"]
            rls_l += 0.5 * tau * integrate(d * d, g)
        dr = (traj.states[k].rho.values - traj.states[k - 1].rho.values) / tau
        rls_r += tau**2 * tau * integrate(dr * dr, g)
        r1, r0 = traj.states[k].rho.values, traj.states[k - 1].rho.values
        floor += tau * (16 * _EPS) ** 2 * integrate(r1 * r1 + r0 * r0, g)
    gap = float(np.max(np.abs(np.diff(cubes, axis=0)))) if traj.j else 0.0
    if holder_constant is None:
        if g.dim == 1:
            x, t, f = cubic_interpolant_samples(traj)
            holder_constant = holder_modulus(x, t, f)
        else:
            holder_constant = float("inf")
    return InterpolantGapReport(np.array(uls_l), np.array(uls_r), rls_l, rls_r, gap,
                                holder_constant * tau**0.25, holder_constant, floor)
