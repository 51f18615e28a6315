"""Data-driven calibration of the uncertainty set and probabilistic guarantees.

Fitting follows a four-step recipe: the nominal value is the sample mean,
samples are scaled by it, mapped through ``g`` and the shape matrix is the
inverse square root of the covariance of those variation vectors.  Three
rules pick ``tau``: full sample coverage, a coordinatewise lower bound on
worst-case scenarios, and a lower bound on the worst-case linear objective.
For independent lognormal data a budget with a coverage guarantee is also
available.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from ._backend import kernels
from ._io import read_text
from .core import NormKind, UncertaintySet, as_vector, operator_norm, vector_norm
from .special import chi2_inv

__all__ = [
    "EIGEN_FLOOR",
    "LognormalSpec",
    "GuaranteeParams",
    "CalibrationReport",
    "fit_nominal",
    "fit_shape_matrix",
    "variation_vectors",
    "inverse_sqrt_psd",
    "tau_full",
    "tau_from_bound",
    "tau_from_value_bound",
    "lognormal_params",
    "lognormal_from_samples",
    "lognormal_set",
    "sample_lognormal",
    "coverage_fraction",
    "chi2_inv",
    "guarantee_radius",
    "tau_guarantee",
    "alpha_g_inequality_check",
    "calibrate",
    "read_samples_csv",
]

#: Smallest covariance eigenvalue accepted by :func:`inverse_sqrt_psd`.
EIGEN_FLOOR = 1e-12


def _samples(samples) -> np.ndarray:
    S = np.asarray(samples, dtype=float)
    if S.ndim == 1:
        S = S[:, None]
    if S.ndim != 2 or S.shape[0] == 0:
        raise ValueError("samples must be a non-empty N x m array")
    if not np.all(np.isfinite(S)):
        raise ValueError("samples must be finite")
    if np.any(S <= 0.0):
        raise ValueError("samples must be strictly positive")
    return S


def fit_nominal(samples) -> np.ndarray:
    """Sample mean of the observations (one row per observation)."""
    return _samples(samples).mean(axis=0)


def variation_vectors(samples, a0) -> np.ndarray:
    """Rows ``g(a^i / a0)`` for each observation ``a^i``."""
    S = _samples(samples)
    a0 = as_vector(a0)
    if S.shape[1] != a0.size:
        raise ValueError("sample dimension does not match a0")
    return kernels.variation(S / a0)


def inverse_sqrt_psd(S, floor: float = EIGEN_FLOOR) -> np.ndarray:
    """Inverse principal square root of a symmetric positive definite matrix.

    Raises
    ------
    ValueError
        If the smallest eigenvalue is below ``floor``; the message carries it.
    """
    S = np.atleast_2d(np.asarray(S, dtype=float))
    S = 0.5 * (S + S.T)
    vals, vecs = np.linalg.eigh(S)
    if vals[0] < floor:
        raise ValueError(f"covariance is singular or indefinite: smallest eigenvalue {vals[0]:.3e}")
    R = (vecs / np.sqrt(vals)) @ vecs.T
    return 0.5 * (R + R.T)


def fit_shape_matrix(samples, a0) -> np.ndarray:
    """Shape matrix ``A = Sigma^{-1/2}`` from the variation vectors.

    ``Sigma`` is the unbiased sample covariance (denominator ``N - 1``) of
    ``y^i = g(a^i / a0)``.
    """
    Y = variation_vectors(samples, a0)
    if Y.shape[0] < 2:
        raise ValueError("at least two samples are needed for a covariance")
    Sigma = np.atleast_2d(np.cov(Y, rowvar=False, ddof=1))
    return inverse_sqrt_psd(Sigma)


def tau_full(samples, a0, A, norm: NormKind | str = NormKind.L2) -> float:
    """Smallest budget that covers every sample: ``max_i ||A y^i||``."""
    norm = NormKind.parse(norm)
    Y = variation_vectors(samples, a0)
    A = np.atleast_2d(np.asarray(A, dtype=float))
    return float(max(vector_norm(A @ y, norm) for y in Y))


def _inverse_norm(A, norm: NormKind) -> float:
    A = np.atleast_2d(np.asarray(A, dtype=float))
    try:
        Ainv = np.linalg.inv(A)
    except np.linalg.LinAlgError as exc:
        raise ValueError("A must be invertible") from exc
    return operator_norm(Ainv, norm)


def tau_from_bound(beta, A, norm: NormKind | str = NormKind.L2) -> float:
    """Budget keeping worst-case scenarios above ``beta * a0``.

    Returns ``min_i g(beta_i) / ||A^{-1}||``; for objectives increasing in
    the parameter every worst-case coordinate then satisfies
    ``a*_i >= beta_i a0_i``.
    """
    norm = NormKind.parse(norm)
    beta = as_vector(beta)
    if np.any(~((beta > 0.0) & (beta < 1.0))):
        raise ValueError("beta must lie in (0, 1) coordinatewise")
    return float(np.min(kernels.variation(beta)) / _inverse_norm(A, norm))


def tau_from_value_bound(gamma: float, t: float, x0, a0, A, norm: NormKind | str = NormKind.L2) -> float:
    """Budget at which the scaled-certificate objective bound equals ``gamma``.

    The certificate ``u = t A0 x0`` bounds ``min_a a^T x0`` from below by
    ``t ln(1 + 1/t) a0^T x0 - tau t ||A^{-T} A0 x0||_*``; the returned budget
    solves that bound for ``gamma``.

    Raises
    ------
    ValueError
        If ``x0 = 0``, ``t <= 0`` or ``gamma`` exceeds the bound at ``tau = 0``.
    """
    norm = NormKind.parse(norm)
    x0 = as_vector(x0)
    a0 = as_vector(a0)
    if t <= 0.0:
        raise ValueError("t must be positive")
    if not np.any(x0):
        raise ValueError("x0 must be nonzero")
    A = np.atleast_2d(np.asarray(A, dtype=float))
    s = np.linalg.solve(A.T, a0 * x0)
    den = t * vector_norm(s, norm.dual())
    num = t * math.log1p(1.0 / t) * float(a0 @ x0) - gamma
    if den <= 0.0:
        raise ValueError("degenerate denominator")
    if num < 0.0:
        raise ValueError("gamma exceeds the bound attainable with tau = 0")
    return num / den


@dataclass(frozen=True)
class LognormalSpec:
    """Independent lognormal model with arithmetic moments ``mu``, ``sigma2``.

    Attributes
    ----------
    mu, sigma2 : ndarray
        Arithmetic means and variances.
    mu_ln, sigma2_ln : ndarray
        Parameters of the underlying normal distribution of ``ln a``.
    lam : float
        Largest log-space variance.
    """

    mu: np.ndarray
    sigma2: np.ndarray
    mu_ln: np.ndarray
    sigma2_ln: np.ndarray
    lam: float

    @property
    def m(self) -> int:
        return self.mu.size

    def to_dict(self) -> dict:
        return {"mu": self.mu.tolist(), "sigma2": self.sigma2.tolist(),
                "mu_ln": self.mu_ln.tolist(), "sigma2_ln": self.sigma2_ln.tolist(), "lambda": self.lam}


def lognormal_params(mu, sigma2) -> LognormalSpec:
    """Convert arithmetic moments to log-space parameters."""
    mu = as_vector(mu)
    sigma2 = as_vector(sigma2)
    if mu.shape != sigma2.shape:
        raise ValueError("mu and sigma2 must have the same length")
    if np.any(mu <= 0.0) or np.any(sigma2 <= 0.0):
        raise ValueError("mu and sigma2 must be strictly positive")
    s2ln = np.log1p(sigma2 / mu**2)
    muln = np.log(mu) - 0.5 * s2ln
    return LognormalSpec(mu, sigma2, muln, s2ln, float(np.max(s2ln)))


def lognormal_from_samples(samples) -> LognormalSpec:
    """Fit independent lognormal marginals from log-space sample moments."""
    L = np.log(_samples(samples))
    if L.shape[0] < 2:
        raise ValueError("at least two samples are needed")
    muln = L.mean(axis=0)
    s2ln = L.var(axis=0, ddof=1)
    if np.any(s2ln <= 0.0):
        raise ValueError("a coordinate has zero log-space variance")
    mu = np.exp(muln + 0.5 * s2ln)
    sigma2 = np.expm1(s2ln) * mu**2
    return LognormalSpec(mu, sigma2, muln, s2ln, float(np.max(s2ln)))


def lognormal_set(spec: LognormalSpec, tau: float) -> UncertaintySet:
    """Set centred at the log-space median with ``A = diag(sigma2_ln)^{-1/2}``."""
    return UncertaintySet(np.exp(spec.mu_ln), tau, np.diag(1.0 / np.sqrt(spec.sigma2_ln)), NormKind.L2)


def sample_lognormal(spec: LognormalSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``n`` independent lognormal vectors."""
    return np.exp(spec.mu_ln + np.sqrt(spec.sigma2_ln) * rng.standard_normal((n, spec.m)))


def coverage_fraction(uset: UncertaintySet, samples) -> float:
    """Fraction of rows inside ``uset`` under the tight-variation test."""
    S = _samples(samples)
    if S.shape[1] != uset.m:
        raise ValueError("sample dimension does not match the set")
    Y = kernels.variation(S / uset.a0)
    budgets = np.array([vector_norm(uset.A @ y, uset.norm) for y in Y])
    return float(np.mean(budgets <= uset.tau))


def guarantee_radius(epsilon: float, m: int) -> float:
    """``sqrt`` of the chi-squared ``(1 - epsilon)`` quantile with ``m`` dof."""
    if not 0.0 < epsilon < 1.0:
        raise ValueError("epsilon must lie in (0, 1)")
    return math.sqrt(chi2_inv(m, 1.0 - epsilon))


def tau_guarantee(epsilon: float, m: int, lam: float) -> float:
    """Smallest budget with coverage probability at least ``1 - epsilon``.

    Parameters
    ----------
    epsilon : float
        Violation probability in ``(0, 1)``.
    m : int
        Dimension of the parameter.
    lam : float
        Largest log-space variance.

    Returns
    -------
    float
        ``d (exp(sqrt(lam) d) - 1)`` with ``d`` from :func:`guarantee_radius`.
    """
    if not lam > 0.0:
        raise ValueError("lambda must be positive")
    d = guarantee_radius(epsilon, m)
    return d * math.expm1(math.sqrt(lam) * d)


def alpha_g_inequality_check(alpha: float, t_grid) -> bool:
    """Whether ``alpha g(t) <= |ln t|`` at every grid point.

    Grid points must lie in ``(max(0, 1 - 1/alpha), 1 + 1/alpha]``.
    """
    if not alpha > 0.0:
        raise ValueError("alpha must be positive")
    t = np.atleast_1d(np.asarray(t_grid, dtype=float))
    lo = max(0.0, 1.0 - 1.0 / alpha)
    hi = 1.0 + 1.0 / alpha
    if np.any(t <= lo) or np.any(t > hi):
        raise ValueError(f"grid points must lie in ({lo}, {hi}]")
    lhs = alpha * kernels.variation(t)
    rhs = np.abs(np.log(t))
    # both sides vanish to second order at t = 1; allow round-off there
    return bool(np.all(lhs <= rhs + 1e-15 * np.maximum(1.0, rhs)))


@dataclass(frozen=True)
class GuaranteeParams:
    epsilon: float
    lam: float
    delta_eps: float
    tau_guarantee: float

    def to_dict(self) -> dict:
        return {"epsilon": self.epsilon, "lambda": self.lam, "delta_eps": self.delta_eps,
                "tau_guarantee": self.tau_guarantee}


@dataclass(frozen=True)
class CalibrationReport:
    """Fitted set parameters and candidate budgets."""

    a0: np.ndarray
    A: np.ndarray
    tau_full: float
    norm: NormKind = NormKind.L2
    tau_bound: float | None = None
    tau_value: float | None = None
    guarantee: GuaranteeParams | None = None
    n_samples: int = 0
    extras: dict = field(default_factory=dict)

    def uncertainty_set(self, tau: float | None = None) -> UncertaintySet:
        return UncertaintySet(self.a0, self.tau_full if tau is None else tau, self.A, self.norm)

    def to_dict(self) -> dict:
        return {
            "a0": self.a0.tolist(),
            "A": self.A.tolist(),
            "norm": self.norm.value,
            "n_samples": self.n_samples,
            "tau_full": self.tau_full,
            "tau_bound": self.tau_bound,
            "tau_value": self.tau_value,
            "guarantee": None if self.guarantee is None else self.guarantee.to_dict(),
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_dict(cls, d: dict) -> "CalibrationReport":
        g = d.get("guarantee")
        return cls(
            a0=as_vector(d["a0"]),
            A=np.atleast_2d(np.asarray(d["A"], dtype=float)),
            tau_full=float(d["tau_full"]),
            norm=NormKind.parse(d.get("norm", "l2")),
            tau_bound=d.get("tau_bound"),
            tau_value=d.get("tau_value"),
            guarantee=None if g is None else GuaranteeParams(g["epsilon"], g["lambda"], g["delta_eps"], g["tau_guarantee"]),
            n_samples=int(d.get("n_samples", 0)),
        )

    @classmethod
    def from_json(cls, text: str) -> "CalibrationReport":
        return cls.from_dict(json.loads(text))


def calibrate(samples, norm: NormKind | str = NormKind.L2, beta=None, gamma: float | None = None,
              t: float = 1.0, x0=None, epsilon: float | None = None) -> CalibrationReport:
    """Fit ``(a0, A)`` and evaluate the budget-selection rules.

    Parameters
    ----------
    samples : array_like
        ``N x m`` positive observations.
    norm : NormKind, optional
    beta : float or array_like, optional
        Target fraction for :func:`tau_from_bound`; a scalar is broadcast.
    gamma, t, x0 : optional
        Inputs of :func:`tau_from_value_bound`; used when ``gamma`` and
        ``x0`` are given.
    epsilon : float, optional
        Violation level for the lognormal guarantee fitted from the samples.
    """
    norm = NormKind.parse(norm)
    S = _samples(samples)
    a0 = fit_nominal(S)
    A = fit_shape_matrix(S, a0)
    tf = tau_full(S, a0, A, norm)
    tb = None
    if beta is not None:
        b = np.broadcast_to(np.asarray(beta, dtype=float), a0.shape)
        tb = tau_from_bound(b, A, norm)
    tv = None
    if gamma is not None and x0 is not None:
        tv = tau_from_value_bound(gamma, t, x0, a0, A, norm)
    gp = None
    if epsilon is not None:
        spec = lognormal_from_samples(S)
        gp = GuaranteeParams(epsilon, spec.lam, guarantee_radius(epsilon, spec.m),
                             tau_guarantee(epsilon, spec.m, spec.lam))
    return CalibrationReport(a0, A, tf, norm, tb, tv, gp, S.shape[0])


def read_samples_csv(source) -> np.ndarray:
    """Read observations from CSV text, a path or a file object.

    One row per observation with decimal-point numbers; a non-numeric first
    row is treated as a header and skipped.
    """
    text = read_text(source)
    rows = [r for r in csv.reader(io.StringIO(text)) if r and any(c.strip() for c in r)]
    if not rows:
        raise ValueError("no samples found")
    try:
        [float(c) for c in rows[0]]
    except ValueError:
        rows = rows[1:]
    try:
        data = np.array([[float(c) for c in r] for r in rows], dtype=float)
    except ValueError as exc:
        raise ValueError(f"non-numeric sample entry: {exc}") from exc
    if data.ndim != 2 or data.shape[0] == 0:
        raise ValueError("ragged or empty sample rows")
    return _samples(data)
