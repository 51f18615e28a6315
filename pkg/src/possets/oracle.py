"""Pessimization oracle: worst-case scenarios over the uncertainty set.

``worst_case`` solves ``min_{a in Omega} f(a, x)`` for an objective that is
convex in ``a``.  Linear objectives over sets with diagonal shape use a
bisection fast path; everything else goes through the barrier solver in
the scaled coordinates ``z = a / a0``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ._backend import kernels
from .core import (
    NormKind,
    UncertaintySet,
    as_vector,
    inverse_variation_lower,
    inverse_variation_upper,
    operator_norm,
    vector_norm,
)
from .solver.barrier import (
    OPTIMAL,
    SmoothProgram,
    norm_epigraph_size,
    smooth_convex_solve,
)

__all__ = [
    "Monotonicity",
    "MonotoneObjective",
    "WorstCaseCertificate",
    "worst_case",
    "worst_case_bounds",
    "decay_envelope",
    "verify_boundary",
    "ACTIVE_ATOL",
]

#: Threshold on ``|df/da_i|`` at ``a0`` for a coordinate to count as active.
ACTIVE_ATOL = 1e-10


class Monotonicity(str, enum.Enum):
    INCREASING = "increasing"
    DECREASING = "decreasing"
    GENERAL = "general"

    @classmethod
    def parse(cls, value) -> "Monotonicity":
        return value if isinstance(value, Monotonicity) else cls(str(value).lower())


@dataclass(frozen=True)
class MonotoneObjective:
    """Objective ``f(a, x)`` convex in ``a`` with a monotonicity tag.

    Parameters
    ----------
    evaluate : callable
        ``(a, x) -> float``.
    gradient_a : callable
        ``(a, x) -> ndarray``, gradient with respect to ``a``.
    monotonicity : Monotonicity, optional
    hessian_a : callable, optional
        ``(a, x) -> ndarray``; finite differences of the gradient otherwise.
    coefficients : callable, optional
        For objectives linear in ``a``: ``x -> c`` with ``f = c^T a + offset(x)``.
    offset : callable, optional
    """

    evaluate: Callable[[np.ndarray, np.ndarray], float]
    gradient_a: Callable[[np.ndarray, np.ndarray], np.ndarray]
    monotonicity: Monotonicity = Monotonicity.GENERAL
    hessian_a: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = None
    coefficients: Callable[[np.ndarray], np.ndarray] | None = None
    offset: Callable[[np.ndarray], float] | None = None

    def __post_init__(self):
        object.__setattr__(self, "monotonicity", Monotonicity.parse(self.monotonicity))

    @property
    def is_linear(self) -> bool:
        return self.coefficients is not None

    @classmethod
    def linear(cls, b: float = 0.0, P=None, q=None,
               monotonicity: Monotonicity | str = Monotonicity.GENERAL) -> "MonotoneObjective":
        """``f(a, x) = a^T (P x + q) - b``; ``P`` defaults to the identity."""
        Pm = None if P is None else np.atleast_2d(np.asarray(P, dtype=float))
        qv = None if q is None else as_vector(q)

        def coef(x):
            x = as_vector(x)
            c = x.copy() if Pm is None else Pm @ x
            return c if qv is None else c + qv

        return cls(
            evaluate=lambda a, x: float(as_vector(a) @ coef(x)) - b,
            gradient_a=lambda a, x: coef(x),
            monotonicity=monotonicity,
            hessian_a=lambda a, x: np.zeros((as_vector(a).size,) * 2),
            coefficients=coef,
            offset=lambda x: -float(b),
        )

    def active(self, a0, x, atol: float = ACTIVE_ATOL) -> np.ndarray:
        """Boolean mask of coordinates with ``|df/da_i(a0, x)| > atol``."""
        return np.abs(as_vector(self.gradient_a(as_vector(a0), x))) > atol

    def check_monotone(self, points, x) -> bool:
        """Whether sampled gradients agree with the monotonicity tag."""
        if self.monotonicity is Monotonicity.GENERAL:
            return True
        for a in points:
            g = as_vector(self.gradient_a(as_vector(a), x))
            if self.monotonicity is Monotonicity.INCREASING and np.any(g < 0):
                return False
            if self.monotonicity is Monotonicity.DECREASING and np.any(g > 0):
                return False
        return True

    def hessian(self, a, x) -> np.ndarray:
        if self.hessian_a is not None:
            return np.atleast_2d(self.hessian_a(a, x))
        a = as_vector(a)
        h = 1e-6 * np.maximum(1.0, np.abs(a))
        H = np.empty((a.size, a.size))
        for i in range(a.size):
            e = np.zeros(a.size)
            e[i] = h[i]
            H[:, i] = (as_vector(self.gradient_a(a + e, x)) - as_vector(self.gradient_a(a - e, x))) / (2 * h[i])
        return 0.5 * (H + H.T)


@dataclass(frozen=True)
class WorstCaseCertificate:
    """Worst-case scenario with boundary and KKT diagnostics.

    Attributes
    ----------
    a_star : ndarray
        Minimiser, ``a0 * z_star``.
    z_star, y_star : ndarray
        Scaled minimiser and its variation vector.
    value : float
        ``f(a_star, x)``.
    budget_residual : float
        ``||A y_star|| - tau``.
    theta : ndarray
        Multiplier of ``a = diag(a0) z``, i.e. ``-grad_a f(a_star, x)``.
    lam : ndarray
        Multipliers of ``g(z_i) <= y_i``.
    lam_budget : float
        Multiplier of the budget constraint.
    active : ndarray
        Boolean mask of active coordinates; the others are free.
    converged : bool
    method : str
        ``"closed_form"``, ``"bisection"`` or ``"barrier"``.
    """

    a_star: np.ndarray
    z_star: np.ndarray
    y_star: np.ndarray
    value: float
    budget_residual: float
    theta: np.ndarray
    lam: np.ndarray
    lam_budget: float
    active: np.ndarray
    converged: bool
    method: str
    message: str = field(default="")

    def to_dict(self) -> dict:
        return {
            "a_star": self.a_star.tolist(),
            "z_star": self.z_star.tolist(),
            "y_star": self.y_star.tolist(),
            "value": self.value,
            "budget_residual": self.budget_residual,
            "multipliers": {
                "theta": self.theta.tolist(),
                "lambda": self.lam.tolist(),
                "lambda_budget": self.lam_budget,
            },
            "active": [int(i) for i in np.flatnonzero(self.active)],
            "free": [int(i) for i in np.flatnonzero(~self.active)],
            "converged": self.converged,
            "method": self.method,
            "message": self.message,
        }


def _budget_subgradient(A, y, norm: NormKind) -> np.ndarray:
    r = A @ y
    if norm is NormKind.L2:
        nr = np.linalg.norm(r)
        s = r / nr if nr > 0 else np.zeros_like(r)
    elif norm is NormKind.L1:
        s = np.sign(r)
    else:
        s = np.zeros_like(r)
        if r.size:
            j = int(np.argmax(np.abs(r)))
            s[j] = np.sign(r[j])
    return A.T @ s


def _multipliers(uset: UncertaintySet, grad_a, z, y, active):
    theta = -grad_a
    c = uset.a0 * grad_a
    lam = np.zeros(uset.m)
    moved = active & (np.abs(z - 1.0) > 1e-300)
    lam[moved] = -c[moved] * z[moved] / (z[moved] - 1.0)
    eta = _budget_subgradient(uset.A, y, uset.norm)
    den = float(eta @ eta)
    lam_budget = float(eta @ lam) / den if den > 0 else 0.0
    return theta, lam, lam_budget


def _tight_budget(uset: UncertaintySet, z) -> float:
    return vector_norm(uset.A @ kernels.variation(z), uset.norm)


def _finish(uset, obj, x, z, y, active, converged, method, msg=""):
    a = uset.a0 * z
    value = float(obj.evaluate(a, x))
    grad = as_vector(obj.gradient_a(a, x))
    theta, lam, lam_b = _multipliers(uset, grad, z, y, active)
    resid = vector_norm(uset.A @ y, uset.norm) - uset.tau
    return WorstCaseCertificate(a, z, y, value, resid, theta, lam, lam_b, active, converged, method, msg)


def _fast_path(uset: UncertaintySet, c: np.ndarray, tol: float) -> np.ndarray:
    d = np.abs(np.diag(uset.A))
    z, _ = kernels.diag_worst_case(c, d, uset.tau, uset.norm.code, tol)
    return np.asarray(z)


def _feasible(uset: UncertaintySet, z) -> bool:
    if _tight_budget(uset, z) > uset.tau:
        return False
    if uset.V is not None and vector_norm(uset.V @ (z - 1.0), uset.norm) > uset.delta:
        return False
    return True


def _polish_to_boundary(uset, obj, x, z, active):
    """Push active coordinates along ``ln z`` until the budget binds.

    For monotone linear objectives every step away from ``e`` on this ray
    lowers the objective, so the result is at least as good and lies on the
    boundary to bisection accuracy.
    """
    logz = np.where(active, np.log(z), 0.0)
    if not np.any(logz):
        return z
    base = obj.evaluate(uset.a0 * z, x)

    def point(scale):
        return np.where(active, np.exp(scale * logz), z)

    lo, hi = 1.0, 2.0
    while _feasible(uset, point(hi)) and hi < 1e6:
        lo, hi = hi, 2.0 * hi
    if not _feasible(uset, point(lo)):
        return z
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if _feasible(uset, point(mid)):
            lo = mid
        else:
            hi = mid
    cand = point(lo)
    return cand if obj.evaluate(uset.a0 * cand, x) <= base else z


def _barrier_worst_case(uset: UncertaintySet, obj: MonotoneObjective, x, tol: float):
    m = uset.m
    a0 = uset.a0
    c_lin = obj.coefficients(x) * a0 if obj.is_linear else None
    use_log = c_lin is not None and uset.V is None and np.all(c_lin >= 0.0)
    kind = uset.norm.value
    k_aux = norm_epigraph_size(m, kind)
    # variables: [s or z (m), y (m), aux]
    i_z = np.arange(m)
    i_y = np.arange(m, 2 * m)
    i_aux = np.arange(2 * m, 2 * m + k_aux)
    k_aux2 = k_aux if uset.V is not None else 0
    i_aux2 = np.arange(2 * m + k_aux, 2 * m + k_aux + k_aux2)
    n = 2 * m + k_aux + k_aux2
    prog = SmoothProgram(n)

    sel_z = np.zeros((m, n))
    sel_z[np.arange(m), i_z] = 1.0

    if use_log:
        def obj_term(s):
            e = np.exp(s)
            return float(c_lin @ e), c_lin * e, np.diag(c_lin * e)
    elif c_lin is not None:
        def obj_term(z):
            return float(c_lin @ z), c_lin.copy(), np.zeros((m, m))
    else:
        def obj_term(z):
            if np.any(~(z > 0.0)):
                return math.inf, None, None
            a = a0 * z
            val = float(obj.evaluate(a, x))
            g = as_vector(obj.gradient_a(a, x)) * a0
            H = obj.hessian(a, x) * np.outer(a0, a0)
            return val, g, H
    prog.add_objective_term(sel_z, np.zeros(m), obj_term)

    for k in range(m):
        M = np.zeros((1, n))
        M[0, i_z[k]] = 1.0
        lin = np.zeros(n)
        lin[i_y[k]] = -1.0
        if use_log:
            def gk(v):
                s = v[0]
                return math.expm1(s) - s, np.array([math.expm1(s)]), np.array([[math.exp(s)]])
        else:
            def gk(v):
                t = v[0]
                if not t > 0.0:
                    return math.inf, None, None
                return float(kernels.variation(np.array([t]))[0]), np.array([1.0 - 1.0 / t]), np.array([[1.0 / t**2]])
        prog.add_smooth_constraint(M, np.zeros(1), gk, lin=lin)

    # ||A y|| <= tau
    Ay = np.zeros((m, n))
    Ay[:, i_y] = uset.A
    if kind == "l2":
        prog.add_soc(Ay, np.zeros(m), np.zeros(n), uset.tau)
    elif kind == "linf":
        prog.add_linear_ineq(np.vstack([Ay, -Ay]), np.full(2 * m, uset.tau))
    else:
        G = np.zeros((2 * m + 1, n))
        G[:m] = Ay
        G[m:2 * m] = -Ay
        G[np.arange(m), i_aux] = -1.0
        G[m + np.arange(m), i_aux] = -1.0
        G[2 * m, i_aux] = 1.0
        prog.add_linear_ineq(G, np.concatenate([np.zeros(2 * m), [uset.tau]]))
    if uset.V is not None:
        Vz = np.zeros((m, n))
        Vz[:, i_z] = uset.V
        off = -uset.V @ np.ones(m)
        if kind == "l2":
            prog.add_soc(Vz, off, np.zeros(n), uset.delta)
        elif kind == "linf":
            prog.add_linear_ineq(np.vstack([Vz, -Vz]), np.concatenate([uset.delta - off, uset.delta + off]))
        else:
            G = np.zeros((2 * m + 1, n))
            G[:m] = Vz
            G[m:2 * m] = -Vz
            G[np.arange(m), i_aux2] = -1.0
            G[m + np.arange(m), i_aux2] = -1.0
            G[2 * m, i_aux2] = 1.0
            prog.add_linear_ineq(G, np.concatenate([-off, off, [uset.delta]]))

    x0 = np.zeros(n)
    x0[i_z] = 0.0 if use_log else 1.0
    ae = vector_norm(uset.A @ np.ones(m), uset.norm)
    kappa = 0.5 * uset.tau / ae if ae > 0 else 1.0
    x0[i_y] = kappa
    if k_aux:
        x0[i_aux] = np.abs(uset.A @ np.full(m, kappa)) + 0.25 * uset.tau / m
    if k_aux2:
        x0[i_aux2] = 0.5 * uset.delta / m
    res = smooth_convex_solve(prog, tol=tol, x0=x0)
    zv = res.x[i_z]
    z = np.exp(zv) if use_log else zv
    return z, res.x[i_y], res


def worst_case(uset: UncertaintySet, obj: MonotoneObjective, x, tol: float = 1e-10) -> WorstCaseCertificate:
    """Minimise ``f(a, x)`` over ``a`` in the uncertainty set.

    Parameters
    ----------
    uset : UncertaintySet
    obj : MonotoneObjective
        Convex in ``a``.
    x : array_like
        Fixed decision.
    tol : float, optional
        Accuracy target (bisection width or barrier gap).

    Returns
    -------
    WorstCaseCertificate
        ``converged`` is False when the barrier solver did not reach its
        tolerance; the status message is kept in ``message``.
    """
    x = as_vector(x)
    m = uset.m
    active = obj.active(uset.a0, x)
    if uset.tau == 0.0:
        z = np.ones(m)
        return _finish(uset, obj, x, z, np.zeros(m), active, True, "closed_form")
    if obj.is_linear and not np.any(active):
        z = np.ones(m)
        return _finish(uset, obj, x, z, np.zeros(m), active, True, "closed_form")

    if obj.is_linear and uset.V is None and uset.is_diagonal:
        c = np.where(active, obj.coefficients(x) * uset.a0, 0.0)
        z = _fast_path(uset, c, min(tol, 1e-12))
        y = kernels.variation(z)
        return _finish(uset, obj, x, z, y, active, True, "bisection")

    z, y, res = _barrier_worst_case(uset, obj, x, tol)
    converged = res.status == OPTIMAL
    if np.all(z > 0.0):
        z = _polish_to_boundary(uset, obj, x, z, active)
        tight = kernels.variation(z)
        if _feasible(uset, z):
            y = tight
    return _finish(uset, obj, x, z, y, active, converged, "barrier", res.message)


def worst_case_bounds(uset: UncertaintySet, monotonicity: Monotonicity | str, tol: float = 1e-12) -> np.ndarray:
    """Coordinatewise interval containing every worst-case scenario.

    Returns
    -------
    ndarray of shape (m, 2)
        ``[g_-^{-1}(tau ||A^{-1}||) a0_i, a0_i]`` for increasing objectives,
        ``[a0_i, g_+^{-1}(tau ||A^{-1}||) a0_i]`` for decreasing ones and the
        union of both for general objectives.
    """
    mono = Monotonicity.parse(monotonicity)
    try:
        Ainv = np.linalg.inv(uset.A)
    except np.linalg.LinAlgError as exc:
        raise ValueError("A must be invertible") from exc
    level = uset.tau * operator_norm(Ainv, uset.norm)
    lo = inverse_variation_lower(level, tol) * uset.a0
    hi = inverse_variation_upper(level, tol) * uset.a0
    if mono is Monotonicity.INCREASING:
        return np.column_stack([lo, uset.a0])
    if mono is Monotonicity.DECREASING:
        return np.column_stack([uset.a0, hi])
    return np.column_stack([lo, hi])


def decay_envelope(tau: float, A, alpha: float, norm: NormKind | str = NormKind.L2) -> tuple[float, float]:
    """Exponential envelope of ``g_-^{-1}(tau ||A^{-1}||)``.

    Parameters
    ----------
    tau : float
    A : array_like
        Invertible shape matrix.
    alpha : float
        Trade-off parameter in ``(0, 1)``.
    norm : NormKind, optional
        Norm inducing ``||A^{-1}||``.

    Returns
    -------
    lower, upper : float
        ``beta * exp(-tau ||A^{-1}|| / alpha)`` and ``exp(-tau ||A^{-1}||)``
        with ``beta = exp(-d / alpha)``, ``d = alpha + (1 - alpha) ln(1 - alpha)``.
        At ``alpha = 1/2`` the factor ``beta`` equals ``2/e``.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    Ainv = np.linalg.inv(np.atleast_2d(np.asarray(A, dtype=float)))
    level = tau * operator_norm(Ainv, norm)
    d = alpha + (1.0 - alpha) * math.log1p(-alpha)
    beta = math.exp(-d / alpha)
    return beta * math.exp(-level / alpha), math.exp(-level)


def verify_boundary(cert: WorstCaseCertificate, uset: UncertaintySet, active=None, tol: float = 1e-6) -> bool:
    """Check the boundary conditions of a worst-case scenario.

    True iff ``| ||A y*|| - tau | <= tol`` and ``g(z*_i) = y*_i`` within
    ``tol`` on the active coordinates.  Vacuously true for ``tau = 0`` or an
    empty active set.
    """
    mask = cert.active if active is None else np.asarray(active)
    if mask.dtype != bool:
        idx = mask.astype(int)
        mask = np.zeros(uset.m, dtype=bool)
        mask[idx] = True
    if uset.tau == 0.0 or not np.any(mask):
        return True
    if abs(cert.budget_residual) > tol:
        return False
    gz = kernels.variation(cert.z_star)
    return bool(np.all(np.abs(gz[mask] - cert.y_star[mask]) <= tol))
