"""Pure-Python (numpy) implementations of the numerical kernels.

This module mirrors the compiled ``_kernels`` extension function for
function.  It is used whenever the extension is not built, or when the
environment variable ``POSSETS_PURE_PYTHON`` is set.
"""

import math

import numpy as np

NORM_LINF = 0
NORM_L1 = 1
NORM_L2 = 2

_MAX_BISECT = 200


def variation(t):
    """Evaluate ``t - ln t - 1`` elementwise (``inf`` for ``t <= 0``).

    Uses ``d - log1p(d)`` with ``d = t - 1`` near 1 to avoid cancellation.
    """
    t = np.asarray(t, dtype=float)
    d = t - 1.0
    near = np.abs(d) < 0.5
    out = np.full(t.shape, np.inf)
    out[near] = d[near] - np.log1p(d[near])
    far = (~near) & (t > 0.0)
    out[far] = t[far] - np.log(t[far]) - 1.0
    return out


def inv_lower(y, tol=1e-12):
    """Solve ``g(t) = y`` on ``(0, 1]`` for every entry of ``y``.

    Bisection runs on ``s = ln t`` inside the bracket ``[-y-1, -y]``, which
    keeps the residual in ``g`` bounded by the bracket width even when
    ``t`` is astronomically small.
    """
    y = np.asarray(y, dtype=float)
    lo = -y - 1.0
    hi = -y.copy()
    for _ in range(_MAX_BISECT):
        if np.all(hi - lo <= tol):
            break
        mid = 0.5 * (lo + hi)
        gm = np.expm1(mid) - mid - y
        # g decreases in s on s <= 0
        above = gm > 0.0
        lo = np.where(above, mid, lo)
        hi = np.where(above, hi, mid)
    s = 0.5 * (lo + hi)
    for _ in range(2):
        deriv = np.expm1(s)
        ok = np.abs(deriv) > 1e-8
        step = np.where(ok, (np.expm1(s) - s - y) / np.where(ok, deriv, 1.0), 0.0)
        cand = s - step
        inside = (cand >= lo - tol) & (cand <= hi + tol)
        s = np.where(inside, cand, s)
    # g(1) = 0 exactly; bisection alone would stop a hair below 1
    return np.where(y <= 0.0, 1.0, np.minimum(np.exp(s), 1.0))


def inv_upper(y, tol=1e-12):
    """Solve ``g(t) = y`` on ``[1, inf)`` for every entry of ``y``."""
    y = np.asarray(y, dtype=float)
    lo = y + 1.0
    hi = 2.0 * (y + 1.0)
    for _ in range(_MAX_BISECT):
        mid = 0.5 * (lo + hi)
        if np.all((hi - lo <= tol) | (mid == lo) | (mid == hi)):
            break
        gm = variation(mid) - y
        above = gm > 0.0
        hi = np.where(above, mid, hi)
        lo = np.where(above, lo, mid)
    t = 0.5 * (lo + hi)
    for _ in range(2):
        deriv = 1.0 - 1.0 / t
        ok = deriv > 1e-8
        step = np.where(ok, (variation(t) - y) / np.where(ok, deriv, 1.0), 0.0)
        cand = t - step
        inside = (cand >= lo - tol) & (cand <= hi + tol)
        t = np.where(inside, cand, t)
    return np.where(y <= 0.0, 1.0, np.maximum(t, 1.0))


def _l2_inner(c, d2, theta, tol):
    # root of c + 2 theta d2 g(z) (1 - 1/z) = 0, solved in s = ln z
    pos = c > 0.0
    lo = np.where(pos, -1.0, 0.0)
    hi = np.where(pos, 0.0, 1.0)

    def resid(s):
        z = np.exp(s)
        return c + 2.0 * theta * d2 * variation(z) * (-np.expm1(-s))

    # widen brackets until the sign changes
    for _ in range(12):
        r_lo = resid(lo)
        bad = pos & (r_lo > 0.0)
        if not bad.any():
            break
        lo = np.where(bad, np.maximum(2.0 * lo, -745.0), lo)
    for _ in range(12):
        r_hi = resid(hi)
        bad = (~pos) & (r_hi < 0.0)
        if not bad.any():
            break
        hi = np.where(bad, np.minimum(2.0 * hi, 700.0), hi)
    for _ in range(_MAX_BISECT):
        if np.all(hi - lo <= tol):
            break
        mid = 0.5 * (lo + hi)
        up = resid(mid) > 0.0
        hi = np.where(up, mid, hi)
        lo = np.where(up, lo, mid)
    return np.exp(0.5 * (lo + hi))


def _budget(z, d, norm):
    y = variation(z)
    if norm == NORM_L2:
        return float(np.sqrt(np.sum((d * y) ** 2)))
    return float(np.sum(d * y))


def diag_worst_case(c, d, tau, norm, tol=1e-12):
    """Minimise ``sum_k c_k z_k`` over the variation set with diagonal shape.

    Parameters
    ----------
    c : ndarray
        Objective coefficients in the scaled coordinates ``z`` (that is,
        ``a0 * grad_a f``).  Zero entries are inactive and stay at ``z = 1``.
    d : ndarray
        Absolute diagonal of the shape matrix; all entries must be positive.
    tau : float
        Budget, ``tau > 0``.
    norm : int
        One of ``NORM_L1``, ``NORM_L2``, ``NORM_LINF``.

    Returns
    -------
    z : ndarray
        Minimiser in scaled coordinates.
    theta : float
        Multiplier of the budget constraint (``nan`` for the sup-norm).
    """
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        return _diag_worst_case(
            np.asarray(c, dtype=float), np.asarray(d, dtype=float), float(tau), int(norm), tol
        )


def _diag_worst_case(c, d, tau, norm, tol):
    z = np.ones_like(c)
    act = c != 0.0
    if not act.any() or tau <= 0.0:
        return z, 0.0
    ca, da = c[act], d[act]

    if norm == NORM_LINF:
        yk = tau / da
        za = np.where(ca > 0.0, inv_lower(yk, tol), inv_upper(yk, tol))
        z[act] = za
        return z, math.nan

    if norm == NORM_L1:
        theta_min = float(np.max(-ca / da, initial=0.0))

        def z_of(phi):
            th = theta_min + math.exp(min(phi, 700.0))
            return th * da / (th * da + ca)
    else:
        theta_min = 0.0
        d2 = da * da

        def z_of(phi):
            return _l2_inner(ca, d2, math.exp(min(phi, 700.0)), tol)

    # budget is decreasing in phi
    lo, hi = -1.0, 1.0
    for _ in range(200):
        if _budget(z_of(lo), da, norm) >= tau:
            break
        lo -= 2.0 * (1.0 + abs(lo))
    for _ in range(200):
        if _budget(z_of(hi), da, norm) <= tau:
            break
        hi += 2.0 * (1.0 + abs(hi))
    for _ in range(_MAX_BISECT):
        mid = 0.5 * (lo + hi)
        if hi - lo <= 1e-15 * max(1.0, abs(mid)) or mid in (lo, hi):
            break
        if _budget(z_of(mid), da, norm) > tau:
            lo = mid
        else:
            hi = mid
    phi = 0.5 * (lo + hi)
    z[act] = z_of(phi)
    return z, theta_min + math.exp(min(phi, 700.0))
