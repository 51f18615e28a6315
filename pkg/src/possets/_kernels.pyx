# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled numerical kernels.

Scalar loops for the variation-function inverses and the diagonal
worst-case search.  The public functions have the same signatures and
semantics as their counterparts in ``_kernels_py``.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, expm1, log, log1p, fabs, sqrt, INFINITY, NAN

cnp.import_array()

NORM_LINF = 0
NORM_L1 = 1
NORM_L2 = 2

cdef int MAX_BISECT = 200


cdef inline double _g(double t) nogil:
    cdef double d = t - 1.0
    if fabs(d) < 0.5:
        return d - log1p(d)
    if t <= 0.0:
        return INFINITY
    return t - log(t) - 1.0


cdef double _inv_lower(double y, double tol) nogil:
    # Newton on s = ln t inside the bracket [-y-1, -y]; f(s) = e^s - 1 - s - y
    # is decreasing and convex there, so Newton iterates approach the root
    # monotonically after at most one overshoot and the bracket only guards
    # against round-off.
    cdef double lo = -y - 1.0
    cdef double hi = -y
    cdef double s, f, deriv, cand
    cdef int k
    if y != y:
        return NAN
    if y <= 0.0:
        return 1.0
    if y == INFINITY:
        return 0.0
    s = -sqrt(2.0 * y) if y < 1.0 else lo
    if s < lo:
        s = lo
    for k in range(MAX_BISECT):
        f = expm1(s) - s - y
        if f > 0.0:
            lo = s
        else:
            hi = s
        deriv = expm1(s)
        cand = s - f / deriv if deriv != 0.0 else NAN
        if not (cand >= lo and cand <= hi):
            cand = 0.5 * (lo + hi)
        if fabs(cand - s) <= tol:
            s = cand
            break
        s = cand
    s = exp(s)
    return 1.0 if s > 1.0 else s


cdef double _inv_upper(double y, double tol) nogil:
    # Newton on g(t) - y inside [y+1, 2(y+1)]; increasing and convex there.
    cdef double lo = y + 1.0
    cdef double hi = 2.0 * (y + 1.0)
    cdef double t, f, deriv, cand
    cdef int k
    if y != y:
        return NAN
    if y <= 0.0:
        return 1.0
    if y == INFINITY:
        return INFINITY
    t = 1.0 + sqrt(2.0 * y) if y < 1.0 else y + 1.0 + log(y + 1.0)
    if t < lo:
        t = lo
    if t > hi:
        t = hi
    for k in range(MAX_BISECT):
        f = _g(t) - y
        if f > 0.0:
            hi = t
        else:
            lo = t
        deriv = 1.0 - 1.0 / t
        cand = t - f / deriv if deriv > 0.0 else NAN
        if not (cand >= lo and cand <= hi):
            cand = 0.5 * (lo + hi)
        if fabs(cand - t) <= tol * t:
            t = cand
            break
        t = cand
    return 1.0 if t < 1.0 else t


def variation(t):
    """Evaluate ``t - ln t - 1`` elementwise (``inf`` for ``t <= 0``)."""
    cdef cnp.ndarray[double, ndim=1] tt = np.ascontiguousarray(np.ravel(t), dtype=np.float64)
    cdef Py_ssize_t i, n = tt.shape[0]
    cdef cnp.ndarray[double, ndim=1] out = np.empty(n, dtype=np.float64)
    with nogil:
        for i in range(n):
            out[i] = _g(tt[i])
    return out.reshape(np.shape(t))


def inv_lower(y, double tol=1e-12):
    """Solve ``g(t) = y`` on ``(0, 1]`` elementwise."""
    cdef cnp.ndarray[double, ndim=1] yy = np.ascontiguousarray(np.ravel(y), dtype=np.float64)
    cdef Py_ssize_t i, n = yy.shape[0]
    cdef cnp.ndarray[double, ndim=1] out = np.empty(n, dtype=np.float64)
    with nogil:
        for i in range(n):
            out[i] = _inv_lower(yy[i], tol)
    return out.reshape(np.shape(y))


def inv_upper(y, double tol=1e-12):
    """Solve ``g(t) = y`` on ``[1, inf)`` elementwise."""
    cdef cnp.ndarray[double, ndim=1] yy = np.ascontiguousarray(np.ravel(y), dtype=np.float64)
    cdef Py_ssize_t i, n = yy.shape[0]
    cdef cnp.ndarray[double, ndim=1] out = np.empty(n, dtype=np.float64)
    with nogil:
        for i in range(n):
            out[i] = _inv_upper(yy[i], tol)
    return out.reshape(np.shape(y))


cdef inline double _l2_resid(double s, double c, double d2, double theta) nogil:
    return c + 2.0 * theta * d2 * _g(exp(s)) * (-expm1(-s))


cdef double _l2_root(double c, double d2, double theta, double tol) nogil:
    cdef double lo, hi, mid
    cdef int k
    if c > 0.0:
        lo = -1.0
        hi = 0.0
        for k in range(12):
            if _l2_resid(lo, c, d2, theta) <= 0.0:
                break
            lo = 2.0 * lo
            if lo < -745.0:
                lo = -745.0
    else:
        lo = 0.0
        hi = 1.0
        for k in range(12):
            if _l2_resid(hi, c, d2, theta) >= 0.0:
                break
            hi = 2.0 * hi
            if hi > 700.0:
                hi = 700.0
    for k in range(MAX_BISECT):
        if hi - lo <= tol:
            break
        mid = 0.5 * (lo + hi)
        if _l2_resid(mid, c, d2, theta) > 0.0:
            hi = mid
        else:
            lo = mid
    return exp(0.5 * (lo + hi))


cdef double _fill(double[::1] c, double[::1] d, double[::1] z, double theta_min,
                  double phi, int norm, double tol) nogil:
    """Fill ``z`` for multiplier ``theta_min + e**phi``; return the budget."""
    cdef Py_ssize_t k, n = c.shape[0]
    cdef double th, acc = 0.0, y
    if phi > 700.0:
        phi = 700.0
    th = theta_min + exp(phi)
    for k in range(n):
        if norm == 1:
            z[k] = th * d[k] / (th * d[k] + c[k])
            acc += d[k] * _g(z[k])
        else:
            z[k] = _l2_root(c[k], d[k] * d[k], th, tol)
            y = d[k] * _g(z[k])
            acc += y * y
    if norm == 2:
        return sqrt(acc)
    return acc


def diag_worst_case(c, d, double tau, int norm, double tol=1e-12):
    """Minimise ``sum_k c_k z_k`` over the variation set with diagonal shape.

    See ``_kernels_py.diag_worst_case`` for the full contract.
    """
    c_all = np.ascontiguousarray(c, dtype=np.float64)
    d_all = np.ascontiguousarray(d, dtype=np.float64)
    z_all = np.ones_like(c_all)
    act = c_all != 0.0
    if not act.any() or tau <= 0.0:
        return z_all, 0.0
    cdef double[::1] ca = np.ascontiguousarray(c_all[act])
    cdef double[::1] da = np.ascontiguousarray(d_all[act])
    za_arr = np.empty(ca.shape[0], dtype=np.float64)
    cdef double[::1] za = za_arr
    cdef Py_ssize_t k, n = ca.shape[0]
    cdef double theta_min = 0.0, lo = -1.0, hi = 1.0, mid, r
    cdef int it
    if norm == 0:
        for k in range(n):
            if ca[k] > 0.0:
                za[k] = _inv_lower(tau / da[k], tol)
            else:
                za[k] = _inv_upper(tau / da[k], tol)
        z_all[act] = za_arr
        return z_all, NAN
    if norm == 1:
        for k in range(n):
            r = -ca[k] / da[k]
            if r > theta_min:
                theta_min = r
    with nogil:
        for it in range(200):
            if _fill(ca, da, za, theta_min, lo, norm, tol) >= tau:
                break
            lo -= 2.0 * (1.0 + fabs(lo))
        for it in range(200):
            if _fill(ca, da, za, theta_min, hi, norm, tol) <= tau:
                break
            hi += 2.0 * (1.0 + fabs(hi))
        for it in range(MAX_BISECT):
            mid = 0.5 * (lo + hi)
            if hi - lo <= 1e-15 * (fabs(mid) if fabs(mid) > 1.0 else 1.0) or mid == lo or mid == hi:
                break
            if _fill(ca, da, za, theta_min, mid, norm, tol) > tau:
                lo = mid
            else:
                hi = mid
        mid = 0.5 * (lo + hi)
        _fill(ca, da, za, theta_min, mid, norm, tol)
    z_all[act] = za_arr
    if mid > 700.0:
        mid = 700.0
    return z_all, theta_min + exp(mid)
