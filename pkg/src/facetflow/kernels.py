"""Hot numeric kernels, each in a numba and a numpy flavour.

The public names (``tridiag_solve``, ``cg_5pt``, ``holder_sup``) are bound at
import time according to :data:`facetflow._accel.USE_NUMBA`.  Both flavours
are always importable under ``*_numba`` / ``*_numpy`` so that tests and the
benchmark can compare them directly.

Conventions for the 2D operator ``-div(a grad u) + c u`` on interior
unknowns of an ``(nx+1, ny+1)`` node array:

* ``ex[i, j]`` is the coefficient on the x-edge between nodes ``(i, j)`` and
  ``(i+1, j)``; shape ``(nx, ny+1)``.
* ``ey[i, j]`` is the coefficient on the y-edge between ``(i, j)`` and
  ``(i, j+1)``; shape ``(nx+1, ny)``.
* Unknown arrays have shape ``(nx-1, ny-1)`` (interior only, zero Dirichlet
  data; boundary data is folded into the right-hand side by the caller).
"""
from __future__ import annotations

import numpy as np
from scipy.linalg import solve_banded

from ._accel import USE_NUMBA, njit

# ---------------------------------------------------------------------------
# tridiagonal solve


def _tridiag_solve_py(lower, diag, upper, rhs):
    n = diag.shape[0]
    cp = np.empty(n)
    dp = np.empty(n)
    cp[0] = upper[0] / diag[0] if n > 1 else 0.0
    dp[0] = rhs[0] / diag[0]
    for i in range(1, n):
        m = diag[i] - lower[i - 1] * cp[i - 1]
        if i < n - 1:
            cp[i] = upper[i] / m
        dp[i] = (rhs[i] - lower[i - 1] * dp[i - 1]) / m
    x = np.empty(n)
    x[n - 1] = dp[n - 1]
    for i in range(n - 2, -1, -1):
        x[i] = dp[i] - cp[i] * x[i + 1]
    return x


tridiag_solve_numba = njit(_tridiag_solve_py)


def tridiag_solve_numpy(lower, diag, upper, rhs):
    """Solve a tridiagonal system via LAPACK banded elimination.

    ``lower`` and ``upper`` have length ``n-1``; ``lower[i]`` multiplies
    ``x[i]`` in row ``i+1``.
    """
    n = diag.shape[0]
    ab = np.zeros((3, n))
    ab[0, 1:] = upper
    ab[1] = diag
    ab[2, :-1] = lower
    return solve_banded((1, 1), ab, rhs, check_finite=False)


# ---------------------------------------------------------------------------
# 5-point variable-coefficient operator and conjugate gradients


@njit
def _apply_5pt_nb(ex, ey, c, hx2, hy2, v, out):
    mx, my = v.shape
    for i in range(mx):
        for j in range(my):
            I = i + 1
            J = j + 1
            w = ex[I - 1, J]
            e = ex[I, J]
            s = ey[I, J - 1]
            nn = ey[I, J]
            acc = ((w + e) / hx2 + (s + nn) / hy2 + c) * v[i, j]
            if i > 0:
                acc -= w / hx2 * v[i - 1, j]
            if i < mx - 1:
                acc -= e / hx2 * v[i + 1, j]
            if j > 0:
                acc -= s / hy2 * v[i, j - 1]
            if j < my - 1:
                acc -= nn / hy2 * v[i, j + 1]
            out[i, j] = acc


def apply_5pt_numpy(ex, ey, c, hx2, hy2, v):
    """Apply the interior operator to ``v`` (zero boundary values)."""
    w = ex[:-1, 1:-1]
    e = ex[1:, 1:-1]
    s = ey[1:-1, :-1]
    n = ey[1:-1, 1:]
    out = ((w + e) / hx2 + (s + n) / hy2 + c) * v
    out[1:, :] -= (w[1:, :] / hx2) * v[:-1, :]
    out[:-1, :] -= (e[:-1, :] / hx2) * v[1:, :]
    out[:, 1:] -= (s[:, 1:] / hy2) * v[:, :-1]
    out[:, :-1] -= (n[:, :-1] / hy2) * v[:, 1:]
    return out


def apply_5pt_numba(ex, ey, c, hx2, hy2, v):
    out = np.empty_like(v)
    _apply_5pt_nb(ex, ey, c, hx2, hy2, v, out)
    return out


@njit
def _cg_5pt_nb(ex, ey, c, hx2, hy2, b, x, tol, base_scale, anorm, maxit, jacobi):
    mx, my = b.shape
    dinv = np.empty_like(b)
    for i in range(mx):
        for j in range(my):
            if jacobi:
                d = (ex[i, j + 1] + ex[i + 1, j + 1]) / hx2 + (ey[i + 1, j] + ey[i + 1, j + 1]) / hy2 + c
                dinv[i, j] = 1.0 / d
            else:
                dinv[i, j] = 1.0
    ax = np.empty_like(b)
    _apply_5pt_nb(ex, ey, c, hx2, hy2, x, ax)
    r = b - ax
    z = dinv * r
    p = z.copy()
    rz = np.sum(r * z)
    ap = np.empty_like(b)
    it = 0
    rmax = np.max(np.abs(r)) if r.size else 0.0
    while it < maxit:
        xmax = np.max(np.abs(x)) if x.size else 0.0
        if rmax <= tol * (base_scale + anorm * xmax):
            break
        _apply_5pt_nb(ex, ey, c, hx2, hy2, p, ap)
        pap = np.sum(p * ap)
        if pap <= 0.0:
            break
        alpha = rz / pap
        x += alpha * p
        r -= alpha * ap
        z = dinv * r
        rz_new = np.sum(r * z)
        p = z + (rz_new / rz) * p
        rz = rz_new
        rmax = np.max(np.abs(r))
        it += 1
    return x, it


def cg_5pt_numba(ex, ey, c, hx2, hy2, b, x0, tol, base_scale, anorm, maxit, jacobi=False):
    x = np.array(x0, dtype=np.float64, copy=True)
    return _cg_5pt_nb(ex, ey, float(c), hx2, hy2, b, x, tol, base_scale, anorm, int(maxit), bool(jacobi))


def cg_5pt_numpy(ex, ey, c, hx2, hy2, b, x0, tol, base_scale, anorm, maxit, jacobi=False):
    """Conjugate gradients on the interior 5-point system.

    Stops when ``max|r| <= tol * (base_scale + anorm * max|x|)`` on the
    recursively updated residual, or after ``maxit`` iterations.  Returns
    ``(x, iterations)``.
    """
    x = np.array(x0, dtype=np.float64, copy=True)
    if jacobi:
        d = (ex[:-1, 1:-1] + ex[1:, 1:-1]) / hx2 + (ey[1:-1, :-1] + ey[1:-1, 1:]) / hy2 + c
        dinv = 1.0 / d
    else:
        dinv = np.ones_like(b)
    r = b - apply_5pt_numpy(ex, ey, c, hx2, hy2, x)
    z = dinv * r
    p = z.copy()
    rz = float(np.sum(r * z))
    it = 0
    while it < maxit:
        if np.max(np.abs(r), initial=0.0) <= tol * (base_scale + anorm * np.max(np.abs(x), initial=0.0)):
            break
        ap = apply_5pt_numpy(ex, ey, c, hx2, hy2, p)
        pap = float(np.sum(p * ap))
        if pap <= 0.0:
            break
        alpha = rz / pap
        x += alpha * p
        r -= alpha * ap
        z = dinv * r
        rz_new = float(np.sum(r * z))
        p = z + (rz_new / rz) * p
        rz = rz_new
        it += 1
    return x, it


# ---------------------------------------------------------------------------
# Hoelder quotient over all sample pairs


@njit
def _holder_sup_nb(x, t, f, ax, at):
    n = x.shape[0]
    best = 0.0
    conflict = -1
    for a in range(n):
        for b in range(a + 1, n):
            dx = abs(x[a] - x[b])
            dt = abs(t[a] - t[b])
            den = dx**ax + dt**at
            df = abs(f[a] - f[b])
            if den == 0.0:
                if df != 0.0 and conflict < 0:
                    conflict = a
                continue
            q = df / den
            if q > best:
                best = q
    return best, conflict


def holder_sup_numba(x, t, f, ax, at):
    return _holder_sup_nb(np.ascontiguousarray(x, dtype=np.float64),
                          np.ascontiguousarray(t, dtype=np.float64),
                          np.ascontiguousarray(f, dtype=np.float64), float(ax), float(at))


def holder_sup_numpy(x, t, f, ax, at, block=512):
    """Return ``(sup, conflict)`` of ``|df| / (|dx|^ax + |dt|^at)`` over pairs.

    ``conflict`` is the index of a sample that coincides with another sample
    but carries a different value, or ``-1``.
    """
    x = np.asarray(x, dtype=np.float64)
    t = np.asarray(t, dtype=np.float64)
    f = np.asarray(f, dtype=np.float64)
    n = x.size
    best = 0.0
    conflict = -1
    for start in range(0, n, block):
        sl = slice(start, min(start + block, n))
        den = np.abs(x[sl, None] - x[None, :]) ** ax + np.abs(t[sl, None] - t[None, :]) ** at
        df = np.abs(f[sl, None] - f[None, :])
        rows = np.arange(sl.start, sl.stop)[:, None]
        upper = np.arange(n)[None, :] > rows
        zero = (den == 0.0) & upper
        bad = zero & (df != 0.0)
        if conflict < 0 and bad.any():
            conflict = int(rows[np.nonzero(bad)[0][0], 0])
        ok = upper & ~zero
        if ok.any():
            best = max(best, float(np.max(df[ok] / den[ok])))
    return best, conflict


if USE_NUMBA:
    tridiag_solve = tridiag_solve_numba
    apply_5pt = apply_5pt_numba
    cg_5pt = cg_5pt_numba
    holder_sup = holder_sup_numba
else:
    tridiag_solve = tridiag_solve_numpy
    apply_5pt = apply_5pt_numpy
    cg_5pt = cg_5pt_numpy
    holder_sup = holder_sup_numpy

BACKEND = "numba" if USE_NUMBA else "numpy"
