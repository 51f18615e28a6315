"""Support functions and dual-form robust constraints.

For the set ``Omega`` written as ``a = a0 + [O  diag(a0)] zeta`` with
``zeta`` in ``Z = Z1 ∩ Z2 ∩ Z3``, a concave constraint ``max_a f(a, x) <= 0``
holds if and only if some certificate ``(u, v, w, s1, s2)`` satisfies

    a0^T v - sum_k {u_k ln(1 - w_k/u_k) + w_k} + tau ||s1||_* + delta ||s2||_*
        - f_*(v, x) <= 0,
    A^T s1 = u,   w + V^T s2 = diag(a0) v,   u > 0,   u - w > 0.

This module evaluates the pieces of that statement and finds optimal
certificates with the package's barrier solver.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .core import NormKind, UncertaintySet, as_vector, vector_norm
from .solver.barrier import (
    OPTIMAL,
    SmoothProgram,
    add_norm_epigraph,
    norm_epigraph_size,
    norm_epigraph_start,
    smooth_convex_solve,
)
from .solver.logterms import log_perspective

__all__ = [
    "ShiftedSupportProblem",
    "SupportSplit",
    "DualCertificate",
    "ConjugateOracle",
    "support_Z1",
    "support_Z2",
    "support_Z3",
    "support_Z",
    "solve_support_split",
    "linear_constraint_conjugate",
    "linear_objective_conjugate",
    "dual_constraint_residual",
    "linear_dual_constraint",
    "objective_dual_value",
    "optimal_constraint_certificate",
    "optimal_objective_certificate",
    "scaled_nominal_certificate",
]

#: ``(v, x) -> f_*(v, x)``; returns ``-inf`` outside the conjugate's domain.
ConjugateOracle = Callable[[np.ndarray, np.ndarray], float]

_LINEAR_ATOL = 1e-8


def _split(y) -> tuple[np.ndarray, np.ndarray]:
    y = as_vector(y)
    if y.size % 2:
        raise ValueError("y must have even length 2m")
    m = y.size // 2
    return y[:m], y[m:]


def _dual_norm(s, norm: NormKind) -> float:
    return vector_norm(s, norm.dual())


@dataclass(frozen=True)
class ShiftedSupportProblem:
    """Data of the shifted set ``Z`` whose support function is evaluated.

    Parameters
    ----------
    A : ndarray
        Invertible shape matrix.
    tau : float
        Strictly positive budget.
    norm : NormKind
    V : ndarray, optional
        Shape of the ellipsoidal component.
    delta : float, optional
    eps : float, optional
        Interior shift; defaults to ``min(1e-9, tau / (2 ||A e||))``.
    """

    A: np.ndarray
    tau: float
    norm: NormKind = NormKind.L2
    V: np.ndarray | None = None
    delta: float | None = None
    eps: float | None = None

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "norm", NormKind.parse(self.norm))
        if not self.tau > 0.0:
            raise ValueError("the shifted support problem needs tau > 0")
        if self.V is not None:
            object.__setattr__(self, "V", np.atleast_2d(np.asarray(self.V, dtype=float)))
            if self.delta is None or self.delta < 0.0:
                raise ValueError("delta must be a nonnegative number when V is given")
        ae = vector_norm(A @ np.ones(A.shape[0]), self.norm)
        eps = self.eps
        if eps is None:
            eps = min(1e-9, self.tau / (2.0 * ae)) if ae > 0 else 1e-9
        eps = float(eps)
        if not eps > 0.0 or not eps * ae < self.tau:
            raise ValueError("eps must satisfy 0 < eps * ||A e|| < tau")
        object.__setattr__(self, "eps", eps)

    @property
    def m(self) -> int:
        return self.A.shape[0]

    @classmethod
    def from_set(cls, uset: UncertaintySet, eps: float | None = None) -> "ShiftedSupportProblem":
        return cls(uset.A, uset.tau, uset.norm, uset.V, uset.delta, eps)


def support_Z1(y, eps: float) -> float:
    """Support function of ``Z1 = {(eta, xi): g(xi + 1) <= eta + eps}``.

    With ``u = -y1`` and ``w = y2`` the value is
    ``sum_k eps u_k - u_k ln(1 - w_k/u_k) - w_k`` on ``u > 0, u - w > 0``.
    On the boundary ``u_k = 0`` the lower-semicontinuous limit ``-w_k`` is
    used for ``w_k <= 0``; everything else is ``+inf``.
    """
    y1, y2 = _split(y)
    u, w = -y1, y2
    total = 0.0
    for uk, wk in zip(u, w):
        if uk > 0.0 and uk - wk > 0.0:
            total += eps * uk - uk * math.log1p(-wk / uk) - wk
        elif uk == 0.0 and wk <= 0.0:
            total += -wk
        else:
            return math.inf
    return total


def support_Z2(y, A, tau: float, eps: float, norm: NormKind | str = NormKind.L2) -> float:
    """Support function of ``Z2 = {(eta, xi): ||A (eta + eps e)|| <= tau}``."""
    y1, y2 = _split(y)
    if np.any(y2 != 0.0):
        return math.inf
    A = np.atleast_2d(np.asarray(A, dtype=float))
    try:
        s = np.linalg.solve(A.T, y1)
    except np.linalg.LinAlgError as exc:
        raise ValueError("A must be invertible") from exc
    return tau * _dual_norm(s, NormKind.parse(norm)) - eps * float(np.sum(y1))


def support_Z3(y, V, delta: float, norm: NormKind | str = NormKind.L2) -> float:
    """Support function of ``Z3 = {(eta, xi): ||V xi|| <= delta}``."""
    y1, y2 = _split(y)
    if np.any(y1 != 0.0):
        return math.inf
    V = np.atleast_2d(np.asarray(V, dtype=float))
    try:
        s = np.linalg.solve(V.T, y2)
    except np.linalg.LinAlgError as exc:
        raise ValueError("V must be invertible") from exc
    return delta * _dual_norm(s, NormKind.parse(norm))


@dataclass(frozen=True)
class SupportSplit:
    """Minimiser of the split program behind :func:`support_Z`.

    ``value`` excludes the constant ``-eps * sum(y1)``.
    """

    value: float
    u: np.ndarray
    w: np.ndarray
    s1: np.ndarray
    s2: np.ndarray | None
    status: str
    iterations: int


def _log_term(v: np.ndarray):
    """``-sum{u ln(1 - w/u) + w}`` over ``v = (u, w)`` with derivatives."""
    m = v.size // 2
    val, g, H = log_perspective(v[:m], v[m:])
    if not math.isfinite(val):
        return math.inf, None, None
    g = -g
    g[m:] -= 1.0
    return -val - float(np.sum(v[m:])), g, -H


def solve_support_split(y, problem: ShiftedSupportProblem, tol: float = 1e-9) -> SupportSplit:
    """Minimise the split program over ``(s1, s2)``.

    The program is ``sum_k phi(u_k, w_k) + tau ||s1||_* + delta ||s2||_*`` with
    ``u = A^T s1 - y1`` and ``w = y2 - V^T s2``, where
    ``phi(u, w) = -u ln(1 - w/u) - w``.
    """
    y1, y2 = _split(y)
    m = problem.m
    if y1.size != m:
        raise ValueError("y has the wrong dimension")
    kind = problem.norm.dual().value
    has_v = problem.V is not None
    k1 = norm_epigraph_size(m, kind)
    k2 = norm_epigraph_size(m, kind) if has_v else 0
    i_s1 = np.arange(m)
    i_r1 = m
    i_a1 = np.arange(m + 1, m + 1 + k1)
    off = m + 1 + k1
    i_s2 = np.arange(off, off + m) if has_v else np.zeros(0, dtype=int)
    i_r2 = off + m if has_v else None
    i_a2 = np.arange(off + m + 1, off + m + 1 + k2) if has_v else None
    n = off + (m + 1 + k2 if has_v else 0)

    prog = SmoothProgram(n)
    prog.c[i_r1] = problem.tau
    Mu = np.zeros((m, n))
    Mu[:, i_s1] = problem.A.T
    Mw = np.zeros((m, n))
    if has_v:
        Mw[:, i_s2] = -problem.V.T
        prog.c[i_r2] = problem.delta
    bu, bw = -y1, y2
    prog.add_objective_term(np.vstack([Mu, Mw]), np.concatenate([bu, bw]), _log_term)
    prog.add_linear_ineq(-Mu, bu, hard=True)
    prog.add_linear_ineq(-(Mu - Mw), bu - bw, hard=True)
    add_norm_epigraph(prog, i_s1, i_r1, kind, i_a1)
    if has_v:
        add_norm_epigraph(prog, i_s2, i_r2, kind, i_a2)

    x0 = np.zeros(n)
    u_start = 1.0 + 2.0 * np.maximum(y2, 0.0) + np.abs(y2)
    x0[i_s1] = np.linalg.solve(problem.A.T, u_start + y1)
    r1, a1 = norm_epigraph_start(x0[i_s1], kind)
    x0[i_r1] = r1
    x0[i_a1] = a1
    if has_v:
        r2, a2 = norm_epigraph_start(np.zeros(m), kind)
        x0[i_r2] = r2
        x0[i_a2] = a2
    res = smooth_convex_solve(prog, tol=tol, x0=x0)
    x = res.x
    s1 = x[i_s1]
    s2 = x[i_s2] if has_v else None
    u = Mu @ x + bu
    w = Mw @ x + bw
    value = _log_term(np.concatenate([u, w]))[0] + problem.tau * _dual_norm(s1, problem.norm)
    if has_v:
        value += problem.delta * _dual_norm(s2, problem.norm)
    return SupportSplit(value, u, w, s1, s2, res.status, res.iterations)


def support_Z(y, problem: ShiftedSupportProblem, tol: float = 1e-9) -> float:
    """Support function of ``Z = Z1 ∩ Z2 ∩ Z3`` (``Z3`` dropped when ``V`` is absent).

    Evaluated as the infimal convolution of the three support functions,
    i.e. the split program of :func:`solve_support_split`, plus the
    constant ``-eps * sum(y1)``.
    """
    y1, _ = _split(y)
    if not np.any(as_vector(y)):
        return 0.0
    split = solve_support_split(y, problem, tol)
    if split.status != OPTIMAL:
        return math.inf
    return split.value - problem.eps * float(np.sum(y1))


@dataclass(frozen=True)
class DualCertificate:
    """Auxiliary vectors witnessing a dual-form robust constraint.

    Attributes
    ----------
    v : ndarray
        Dual multiplier of the uncertain parameter.
    u : ndarray
        Strictly positive.
    w : ndarray
        With ``u - w`` strictly positive.
    s1 : ndarray
        Dual variable of the ``tau`` budget, ``A^T s1 = u``.
    s2 : ndarray or None
        Dual variable of the ``delta`` budget, ``w + V^T s2 = diag(a0) v``.
    """

    v: np.ndarray
    u: np.ndarray
    w: np.ndarray
    s1: np.ndarray
    s2: np.ndarray | None = None

    def __post_init__(self):
        for name in ("v", "u", "w", "s1"):
            object.__setattr__(self, name, as_vector(getattr(self, name)))
        if self.s2 is not None:
            object.__setattr__(self, "s2", as_vector(self.s2))
        if np.any(~(self.u > 0.0)):
            raise ValueError("certificate needs u > 0")
        if np.any(~(self.u - self.w > 0.0)):
            raise ValueError("certificate needs u - w > 0")

    def linear_residuals(self, uset: UncertaintySet) -> tuple[float, float]:
        """Max-norm residuals of ``A^T s1 = u`` and ``w + V^T s2 = A0 v``."""
        r1 = float(np.max(np.abs(uset.A.T @ self.s1 - self.u)))
        rhs = uset.a0 * self.v
        lhs = self.w.copy()
        if uset.V is not None and self.s2 is not None:
            lhs = lhs + uset.V.T @ self.s2
        r2 = float(np.max(np.abs(lhs - rhs)))
        return r1, r2

    def to_dict(self) -> dict:
        out = {k: getattr(self, k).tolist() for k in ("v", "u", "w", "s1")}
        out["s2"] = None if self.s2 is None else self.s2.tolist()
        return out


def _check_certificate(cert: DualCertificate, uset: UncertaintySet):
    if cert.u.size != uset.m:
        raise ValueError("certificate dimension does not match the set")
    r1, r2 = cert.linear_residuals(uset)
    scale = 1.0 + max(float(np.max(np.abs(cert.u))), float(np.max(np.abs(cert.w))))
    if r1 > _LINEAR_ATOL * scale or r2 > _LINEAR_ATOL * scale:
        raise ValueError(f"certificate violates its linear equations (residuals {r1:.2e}, {r2:.2e})")


def linear_constraint_conjugate(b: float, atol: float = 1e-9) -> ConjugateOracle:
    """Concave conjugate in ``a`` of ``f(a, x) = a^T x - b``.

    Equals ``b`` when ``v = x`` and ``-inf`` otherwise.
    """

    def conj(v, x):
        return float(b) if np.max(np.abs(as_vector(v) - as_vector(x)), initial=0.0) <= atol else -math.inf

    return conj


def linear_objective_conjugate(atol: float = 1e-9) -> ConjugateOracle:
    """Concave conjugate in ``a`` of ``f0(a, x) = a^T x``."""
    return linear_constraint_conjugate(0.0, atol)


def _log_sum(u, w) -> float:
    return float(np.sum(u * np.log1p(-w / u) + w))


def _budget_terms(cert: DualCertificate, uset: UncertaintySet) -> float:
    val = uset.tau * _dual_norm(cert.s1, uset.norm)
    if uset.V is not None and cert.s2 is not None:
        val += uset.delta * _dual_norm(cert.s2, uset.norm)
    return val


def dual_constraint_residual(cert: DualCertificate, x, uset: UncertaintySet, conj: ConjugateOracle) -> float:
    """Left-hand side of the dual-form robust constraint.

    A value ``<= 0`` certifies ``max_{a in Omega} f(a, x) <= 0``.  Returns
    ``+inf`` when ``v`` is outside the conjugate's domain.
    """
    _check_certificate(cert, uset)
    fc = conj(cert.v, as_vector(x))
    if fc == -math.inf:
        return math.inf
    return float(uset.a0 @ cert.v) - _log_sum(cert.u, cert.w) + _budget_terms(cert, uset) - fc


def linear_dual_constraint(x, u, s1, uset: UncertaintySet, b: float) -> float:
    """``-sum u_k ln(1 - a0_k x_k / u_k) + tau ||s1||_* - b`` for ``f = a^T x - b``.

    This is the dual residual with ``v = x`` and ``w = diag(a0) x``.
    """
    x, u, s1 = as_vector(x), as_vector(u), as_vector(s1)
    if np.any(~(u > 0.0)):
        raise ValueError("u must be strictly positive")
    ratio = uset.a0 * x / u
    if np.any(~(ratio < 1.0)):
        raise ValueError("log argument 1 - a0 x / u must be positive")
    if np.max(np.abs(uset.A.T @ s1 - u)) > _LINEAR_ATOL * (1.0 + np.max(np.abs(u))):
        raise ValueError("A^T s1 must equal u")
    return float(-np.sum(u * np.log1p(-ratio))) + uset.tau * _dual_norm(s1, uset.norm) - float(b)


def objective_dual_value(x, cert: DualCertificate, uset: UncertaintySet, conj: ConjugateOracle) -> float:
    """Lower bound on ``min_{a in Omega} f0(a, x)`` given by a certificate.

    Value ``-a0^T v + sum{u ln(1 - w/u) + w} - tau ||s1||_* - delta ||s2||_*
    - f0_*(-v, x)``.  For linear ``f0 = a^T x`` the certificate uses
    ``v = -x`` and ``w + V^T s2 = -diag(a0) x``.
    """
    _check_certificate(cert, uset)
    fc = conj(-cert.v, as_vector(x))
    if fc == -math.inf:
        return -math.inf
    return -float(uset.a0 @ cert.v) + _log_sum(cert.u, cert.w) - _budget_terms(cert, uset) - fc


def _limit_certificate(uset: UncertaintySet, v: np.ndarray) -> DualCertificate:
    """Certificate for the two cases where the optimum is only approached.

    With ``tau = 0`` the log terms tend to ``-a0^T v`` as ``u`` grows.  With
    ``v = 0`` every term but ``tau ||s1||_*`` vanishes, and that one tends
    to zero as ``u`` shrinks.
    """
    w = uset.a0 * v
    scale = 1e8 if uset.tau == 0.0 else 1e-12
    u = scale * (1.0 + np.abs(w))
    s1 = np.linalg.solve(uset.A.T, u)
    s2 = np.zeros(uset.m) if uset.V is not None else None
    return DualCertificate(v=v, u=u, w=w, s1=s1, s2=s2)


def optimal_constraint_certificate(uset: UncertaintySet, x, b: float, tol: float = 1e-9):
    """Certificate minimising the dual residual of ``f(a, x) = a^T x - b``.

    Returns
    -------
    cert : DualCertificate
    residual : float
        Minimal residual, equal to ``max_{a in Omega} a^T x - b``.
    """
    x = as_vector(x)
    conj = linear_constraint_conjugate(b)
    if uset.tau == 0.0 or not np.any(x):
        cert = _limit_certificate(uset, x)
        return cert, dual_constraint_residual(cert, x, uset, conj)
    prob = ShiftedSupportProblem.from_set(uset)
    y = np.concatenate([np.zeros(uset.m), uset.a0 * x])
    split = solve_support_split(y, prob, tol)
    cert = DualCertificate(v=x, u=split.u, w=split.w, s1=split.s1, s2=split.s2)
    return cert, dual_constraint_residual(cert, x, uset, conj)


def optimal_objective_certificate(uset: UncertaintySet, x, tol: float = 1e-9):
    """Certificate maximising :func:`objective_dual_value` for ``f0 = a^T x``.

    Returns
    -------
    cert : DualCertificate
    value : float
        The bound, equal to ``min_{a in Omega} a^T x``.
    """
    x = as_vector(x)
    conj = linear_objective_conjugate()
    if uset.tau == 0.0 or not np.any(x):
        cert = _limit_certificate(uset, -x)
        return cert, objective_dual_value(x, cert, uset, conj)
    prob = ShiftedSupportProblem.from_set(uset)
    y = np.concatenate([np.zeros(uset.m), -uset.a0 * x])
    split = solve_support_split(y, prob, tol)
    cert = DualCertificate(v=-x, u=split.u, w=split.w, s1=split.s1, s2=split.s2)
    return cert, objective_dual_value(x, cert, uset, conj)


def scaled_nominal_certificate(uset: UncertaintySet, x0, t: float) -> DualCertificate:
    """Certificate ``u = t diag(a0) x0``, ``s1 = A^{-T} u`` for a linear objective.

    Gives the closed-form bound
    ``t ln(1 + 1/t) a0^T x0 - t tau ||A^{-T} diag(a0) x0||_*``.
    Requires ``diag(a0) x0 > 0`` and no ellipsoidal component.
    """
    if uset.V is not None:
        raise ValueError("closed-form certificate assumes no ellipsoidal component")
    x0 = as_vector(x0)
    u = t * uset.a0 * x0
    s1 = np.linalg.solve(uset.A.T, u)
    return DualCertificate(v=-x0, u=u, w=-uset.a0 * x0, s1=s1)
