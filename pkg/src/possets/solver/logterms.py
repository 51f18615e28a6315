"""Logarithmic terms shared by the dual reformulations.

The dual constraints contain sums of ``u * ln(1 - w / u)``, the perspective
of ``ln(1 - t)``.  This module evaluates that sum with exact derivatives,
either with the true logarithm or with its tangent-line extension below a
small threshold (the safeguarded log), which keeps iterates well-defined.
"""

from __future__ import annotations

import math

import numpy as np

__all__ = ["safeguarded_log", "log_perspective", "DEFAULT_EPS_LOG"]

DEFAULT_EPS_LOG = 1e-9


def safeguarded_log(x, eps_log: float = DEFAULT_EPS_LOG):
    """Logarithm continued by its tangent line below ``eps_log``.

    Parameters
    ----------
    x : float or array_like
    eps_log : float, optional
        Knot of the extension, strictly positive.

    Returns
    -------
    float or ndarray
        ``ln x`` for ``x >= eps_log`` and
        ``(x - eps_log) / eps_log + ln eps_log`` otherwise.  The function is
        concave and continuously differentiable.
    """
    if not eps_log > 0.0:
        raise ValueError("eps_log must be positive")
    arr = np.asarray(x, dtype=float)
    safe = np.maximum(arr, eps_log)
    out = np.where(arr >= eps_log, np.log(safe), (arr - eps_log) / eps_log + math.log(eps_log))
    return float(out) if np.ndim(x) == 0 else out


def _log_derivs(r, eps_log):
    if eps_log is None:
        return np.log(r), 1.0 / r, -1.0 / r**2
    above = r >= eps_log
    safe = np.maximum(r, eps_log)
    val = np.where(above, np.log(safe), (r - eps_log) / eps_log + math.log(eps_log))
    d1 = np.where(above, 1.0 / safe, 1.0 / eps_log)
    d2 = np.where(above, -1.0 / safe**2, 0.0)
    return val, d1, d2


def log_perspective(u, w, eps_log: float | None = None):
    """Evaluate ``sum_k u_k * l(1 - w_k / u_k)`` with gradient and Hessian.

    Parameters
    ----------
    u, w : ndarray
        Vectors of equal length; ``u`` must be strictly positive.
    eps_log : float or None
        ``None`` uses the true logarithm (domain ``u > w``); a positive value
        uses :func:`safeguarded_log`.

    Returns
    -------
    value : float
        ``-inf`` outside the domain.
    grad : ndarray
        Gradient with respect to ``(u, w)`` stacked.
    hess : ndarray
        ``2m x 2m`` Hessian; negative semidefinite.
    """
    u = np.asarray(u, dtype=float)
    w = np.asarray(w, dtype=float)
    m = u.size
    if np.any(~(u > 0.0)):
        return -math.inf, None, None
    ratio = w / u
    r = 1.0 - ratio
    if eps_log is None and np.any(~(r > 0.0)):
        return -math.inf, None, None
    lv, d1, d2 = _log_derivs(r, eps_log)
    val = float(np.sum(u * lv))
    gu = lv + d1 * ratio
    gw = -d1
    grad = np.concatenate([gu, gw])
    # Hessian of a perspective: (l''(r) / u) * v v^T with v = (-w/u, 1)
    k = d2 / u
    hess = np.zeros((2 * m, 2 * m))
    idx = np.arange(m)
    hess[idx, idx] = k * ratio**2
    hess[idx, m + idx] = -k * ratio
    hess[m + idx, idx] = -k * ratio
    hess[m + idx, m + idx] = k
    return val, grad, hess
