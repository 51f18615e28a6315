"""Regularized incomplete gamma function and chi-squared quantiles."""

from __future__ import annotations

import math

__all__ = ["gamma_p", "chi2_cdf", "chi2_inv"]

_EPS = 1e-16
_TINY = 1e-300
_MAX_TERMS = 100_000


def _series(a: float, x: float) -> float:
    term = 1.0 / a
    total = term
    ap = a
    for _ in range(_MAX_TERMS):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * _EPS:
            break
    return total * math.exp(-x + a * math.log(x) - math.lgamma(a))


def _continued_fraction(a: float, x: float) -> float:
    """Upper tail ``Q(a, x)`` by modified Lentz evaluation."""
    b = x + 1.0 - a
    c = 1.0 / _TINY
    d = 1.0 / b
    h = d
    for i in range(1, _MAX_TERMS):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < _TINY:
            d = _TINY
        c = b + an / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            break
    return h * math.exp(-x + a * math.log(x) - math.lgamma(a))


def gamma_p(a: float, x: float) -> float:
    """Regularized lower incomplete gamma ``P(a, x)``.

    Uses the power series for ``x < a + 1`` and the continued fraction for
    the upper tail otherwise.
    """
    if a <= 0.0:
        raise ValueError("a must be positive")
    if x <= 0.0:
        return 0.0
    if x < a + 1.0:
        return min(1.0, _series(a, x))
    return max(0.0, 1.0 - _continued_fraction(a, x))


def chi2_cdf(x: float, dof: int) -> float:
    """Chi-squared distribution function with ``dof`` degrees of freedom."""
    return gamma_p(0.5 * dof, 0.5 * x)


def _chi2_pdf(x: float, dof: int) -> float:
    k = 0.5 * dof
    if x <= 0.0:
        return 0.0
    return math.exp((k - 1.0) * math.log(x) - 0.5 * x - k * math.log(2.0) - math.lgamma(k))


def chi2_inv(dof: int, p: float, tol: float = 1e-10) -> float:
    """Quantile of the chi-squared distribution.

    Parameters
    ----------
    dof : int
        Degrees of freedom, ``1 <= dof <= 10**4``.
    p : float
        Probability in ``(0, 1)``.
    tol : float, optional
        Absolute tolerance on the returned quantile.

    Returns
    -------
    float
        ``x`` with ``P(dof/2, x/2) = p``.

    Notes
    -----
    A bracket is grown from the mean, then Newton steps on the CDF are taken
    whenever they stay inside the bracket; otherwise the bracket is bisected.
    """
    if not 0.0 < p < 1.0:
        raise ValueError("p must lie in (0, 1)")
    if int(dof) != dof or not 1 <= dof <= 10_000:
        raise ValueError("dof must be an integer in [1, 10000]")
    dof = int(dof)
    lo, hi = 0.0, float(dof)
    while chi2_cdf(hi, dof) < p:
        lo, hi = hi, 2.0 * hi
    x = 0.5 * (lo + hi)
    for _ in range(400):
        f = chi2_cdf(x, dof) - p
        if f > 0.0:
            hi = x
        else:
            lo = x
        if hi - lo <= tol:
            break
        dens = _chi2_pdf(x, dof)
        cand = x - f / dens if dens > 0.0 else math.nan
        if lo < cand < hi:
            step = abs(cand - x)
            x = cand
            if step <= 0.1 * tol:
                break
        else:
            x = 0.5 * (lo + hi)
    return x
