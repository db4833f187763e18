"""Dense Newton solver for one implicit step.

Testing oracle only: it solves the same discrete system as
:func:`facetflow.stepper.solve_step` by a completely different route
(Newton on the coupled unknowns with the analytic Jacobian), so agreement
between the two certifies the fixed-point machinery.  Cost is cubic in the
number of nodes; keep it to tiny grids.
"""
from __future__ import annotations

import numpy as np

from .elliptic import EllipticOperator, assemble_interior
from .grid import laplacian_interior, values_of
from .stepper import ProblemData


def newton_step(u_prev, data: ProblemData, tau: float, psi_guess=None, tol: float = 1e-13,
                max_iter: int = 60) -> tuple[np.ndarray, np.ndarray, float]:
    """Return ``(u, psi, residual)`` solving the step system by Newton's method."""
    g = data.grid
    up = np.asarray(values_of(u_prev), dtype=float).reshape(g.shape)
    inner = g.interior
    m = int(np.prod([n - 1 for n in g.cells]))
    lap = -assemble_interior(EllipticOperator(g)).toarray()  # interior block of Laplace_h
    eye = np.eye(m)

    u = up.copy()
    bm = g.boundary_mask
    u[bm] = data.b0[bm]
    psi = data.psi_boundary.copy()
    if psi_guess is None:
        psi[inner] = -np.log(np.maximum(laplacian_interior(up, g), data.c0))
    else:
        psi[inner] = np.asarray(values_of(psi_guess)).reshape(g.shape)[inner]

    def F(u, psi):
        r1 = (u - up)[inner] / tau - laplacian_interior(np.exp(3 * psi), g) + tau * psi[inner]
        r2 = laplacian_interior(u, g) - np.exp(-psi[inner])
        return np.concatenate([r1.ravel(), r2.ravel()])

    r = F(u, psi)
    for _ in range(max_iter):
        rn = np.max(np.abs(r))
        if rn < tol:
            break
        p = psi[inner].ravel()
        J = np.block([
            [eye / tau, -lap * (3 * np.exp(3 * p))[None, :] + tau * eye],
            [lap, np.diag(np.exp(-p))],
        ])
        dz = np.linalg.solve(J, -r)
        lam = 1.0
        while True:
            un = u.copy()
            pn = psi.copy()
            un[inner] += dz[:m].reshape(un[inner].shape) * lam
            pn[inner] += dz[m:].reshape(pn[inner].shape) * lam
            with np.errstate(over="ignore", invalid="ignore"):
                rnew = F(un, pn)
            if np.all(np.isfinite(rnew)) and np.max(np.abs(rnew)) < (1 - 1e-4 * lam) * rn or lam < 1e-6:
                break
            lam *= 0.5
        u, psi, r = un, pn, rnew
    return u, psi, float(np.max(np.abs(r)))


def oracle_case(rng: np.random.Generator, cells: int = 8, tau: float | None = None):
    """Random small step problem: ``b1 = 1 + x/2`` on ``(0, 1)`` and a perturbed ``u_prev``.

    ``u0 = x^2/2 + x^3/12`` has ``Laplace u0 = 1 + x/2``, so the data are
    compatible with floor ``c0 = 1``.  Returns ``(data, u_prev, tau)``.
    """
    from .grid import build_grid

    g = build_grid(1, [1.0], [cells])
    x = g.coords[0]
    u0 = x**2 / 2 + x**3 / 12
    b1 = 1 + x / 2
    data = ProblemData(g, u0.copy(), b1, 1.0, u0, b1)
    u_prev = u0.copy()
    u_prev[g.interior] += 0.05 * rng.standard_normal(cells - 1)
    if tau is None:
        tau = float(10 ** rng.uniform(-3, -1))
    return data, u_prev, tau
