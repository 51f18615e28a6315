"""Variation function, uncertainty-set value type and membership tests.

The uncertainty set is

    Omega(a0, tau, A) = { a = diag(a0) z : g(z_i) <= y_i, ||A y|| <= tau },

with ``g(t) = t - ln t - 1``.  Optionally the component
``||V (z - e)|| <= delta`` (same norm) is intersected with it.  Every point of the set
is strictly positive for finite ``tau``.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from ._backend import kernels

__all__ = [
    "variation",
    "inverse_variation_lower",
    "inverse_variation_upper",
    "log_inverse_variation_lower",
    "NormKind",
    "vector_norm",
    "operator_norm",
    "UncertaintySet",
    "EllipsoidalSet",
    "PointDiagnostics",
    "contains",
    "boundary_sample",
    "boundary_sample_log",
    "MEMBERSHIP_ATOL",
    "random_set",
    "as_vector",
]

#: Absolute slack applied to ``budget <= tau`` in membership tests.
MEMBERSHIP_ATOL = 1e-12


def variation(t):
    """Evaluate the variation function ``g(t) = t - ln t - 1``.

    Parameters
    ----------
    t : float or array_like
        Strictly positive argument.

    Returns
    -------
    float or ndarray
        Nonnegative value, zero exactly at ``t = 1``.

    Raises
    ------
    ValueError
        If any entry of ``t`` is not strictly positive.
    """
    arr = np.asarray(t, dtype=float)
    if np.any(~(arr > 0.0)):
        raise ValueError("variation is defined only for t > 0")
    out = kernels.variation(np.atleast_1d(arr)).reshape(arr.shape)
    return float(out) if np.ndim(t) == 0 else out


def _check_y(y):
    arr = np.asarray(y, dtype=float)
    if np.any(~(arr >= 0.0)):
        raise ValueError("inverse variation requires y >= 0")
    return arr


def inverse_variation_lower(y, tol: float = 1e-12):
    """Return the ``t`` in ``(0, 1]`` with ``g(t) = y``.

    Parameters
    ----------
    y : float or array_like
        Nonnegative level(s).
    tol : float, optional
        Bracket width of the bisection stage (in ``ln t``).

    Returns
    -------
    float or ndarray
        Lower-branch preimage.  Underflows to ``0.0`` once ``y`` exceeds
        roughly 744; use :func:`log_inverse_variation_lower` there.
    """
    arr = _check_y(y)
    out = np.asarray(kernels.inv_lower(np.atleast_1d(arr).ravel(), tol)).reshape(arr.shape)
    return float(out) if np.ndim(y) == 0 else out


def inverse_variation_upper(y, tol: float = 1e-12):
    """Return the ``t`` in ``[1, inf)`` with ``g(t) = y``."""
    arr = _check_y(y)
    out = np.asarray(kernels.inv_upper(np.atleast_1d(arr).ravel(), tol)).reshape(arr.shape)
    return float(out) if np.ndim(y) == 0 else out


def log_inverse_variation_lower(y, tol: float = 1e-12):
    """Return ``ln t`` for the lower-branch preimage of ``y``.

    Stays finite where the preimage itself underflows: for large ``y`` the
    equation ``e**s - s - 1 = y`` gives ``s = -(y + 1)`` to double precision.
    """
    arr = np.atleast_1d(_check_y(y)).ravel()
    t = np.asarray(kernels.inv_lower(arr, tol))
    with np.errstate(divide="ignore"):
        s = np.where(t > 1e-300, np.log(np.maximum(t, 1e-300)), -(arr + 1.0))
    s = s.reshape(np.shape(y))
    return float(s) if np.ndim(y) == 0 else s


class NormKind(str, enum.Enum):
    """Vector norm used for the variation budget."""

    L1 = "l1"
    L2 = "l2"
    LINF = "linf"

    def dual(self) -> "NormKind":
        """Return the dual norm kind."""
        return {NormKind.L1: NormKind.LINF, NormKind.L2: NormKind.L2, NormKind.LINF: NormKind.L1}[self]

    @property
    def code(self) -> int:
        """Integer tag understood by the compiled kernels."""
        return {NormKind.LINF: 0, NormKind.L1: 1, NormKind.L2: 2}[self]

    @property
    def order(self) -> float:
        return {NormKind.L1: 1, NormKind.L2: 2, NormKind.LINF: np.inf}[self]

    @classmethod
    def parse(cls, value: "str | NormKind") -> "NormKind":
        if isinstance(value, NormKind):
            return value
        key = str(value).strip().lower().replace("-", "").replace("_", "")
        aliases = {"l1": cls.L1, "1": cls.L1, "l2": cls.L2, "2": cls.L2,
                   "linf": cls.LINF, "inf": cls.LINF, "max": cls.LINF}
        if key not in aliases:
            raise ValueError(f"unknown norm kind {value!r}")
        return aliases[key]


def vector_norm(x, kind: NormKind | str = NormKind.L2) -> float:
    """Norm of a vector for the given kind."""
    return float(np.linalg.norm(np.asarray(x, dtype=float).ravel(), NormKind.parse(kind).order))


def operator_norm(M, kind: NormKind | str = NormKind.L2) -> float:
    """Operator norm induced by the vector norm ``kind``.

    Spectral norm for L2, maximum absolute column sum for L1 and maximum
    absolute row sum for the sup-norm.
    """
    M = np.atleast_2d(np.asarray(M, dtype=float))
    kind = NormKind.parse(kind)
    if kind is NormKind.L2:
        return float(np.linalg.norm(M, 2))
    if kind is NormKind.L1:
        return float(np.abs(M).sum(axis=0).max())
    return float(np.abs(M).sum(axis=1).max())


def _as_matrix(M, m: int, name: str) -> np.ndarray:
    arr = np.asarray(M, dtype=float)
    if arr.ndim == 0 and m == 1:
        arr = arr.reshape(1, 1)
    if arr.shape != (m, m):
        raise ValueError(f"{name} must be {m}x{m}, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} has non-finite entries")
    return arr


@dataclass(frozen=True)
class UncertaintySet:
    """Positivity-preserving uncertainty set.

    Parameters
    ----------
    a0 : array_like
        Nominal value, strictly positive.
    tau : float
        Budget on the variation vector, nonnegative.
    A : array_like
        ``m x m`` shape matrix acting on the variation vector.
    norm : NormKind or str, optional
        Norm used for the budget, L2 by default.
    V : array_like, optional
        Shape of the ellipsoidal component acting on ``z - e``.
    delta : float, optional
        Radius of the ellipsoidal component.  Required together with ``V``.
    """

    a0: np.ndarray
    tau: float
    A: np.ndarray
    norm: NormKind = NormKind.L2
    V: np.ndarray | None = None
    delta: float | None = None

    def __post_init__(self):
        a0 = np.atleast_1d(np.asarray(self.a0, dtype=float)).ravel()
        if a0.size == 0:
            raise ValueError("a0 must be nonempty")
        if not np.all(np.isfinite(a0)) or np.any(a0 <= 0.0):
            raise ValueError("every coordinate of a0 must be strictly positive")
        tau = float(self.tau)
        if not tau >= 0.0:
            raise ValueError("tau must be nonnegative")
        m = a0.size
        A = _as_matrix(self.A, m, "A")
        if (self.V is None) != (self.delta is None):
            raise ValueError("V and delta must be given together")
        V = None if self.V is None else _as_matrix(self.V, m, "V")
        delta = None
        if self.delta is not None:
            delta = float(self.delta)
            if not delta >= 0.0:
                raise ValueError("delta must be nonnegative")
        for arr in (a0, A, V):
            if arr is not None:
                arr.setflags(write=False)
        object.__setattr__(self, "a0", a0)
        object.__setattr__(self, "tau", tau)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "V", V)
        object.__setattr__(self, "delta", delta)
        object.__setattr__(self, "norm", NormKind.parse(self.norm))

    @property
    def m(self) -> int:
        """Dimension of the uncertain parameter."""
        return self.a0.size

    @property
    def A0(self) -> np.ndarray:
        """``diag(a0)``."""
        return np.diag(self.a0)

    @property
    def has_ellipsoid(self) -> bool:
        return self.V is not None

    @property
    def is_diagonal(self) -> bool:
        return bool(np.count_nonzero(self.A - np.diag(np.diag(self.A))) == 0)

    def with_tau(self, tau: float) -> "UncertaintySet":
        """Copy of the set with a different budget."""
        return UncertaintySet(self.a0, tau, self.A, self.norm, self.V, self.delta)

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {
            "a0": self.a0.tolist(),
            "tau": self.tau,
            "A": self.A.tolist(),
            "norm": self.norm.value,
        }
        if self.V is not None:
            out["V"] = self.V.tolist()
            out["delta"] = self.delta
        return out

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "UncertaintySet":
        missing = {"a0", "tau", "A"} - set(data)
        if missing:
            raise ValueError(f"uncertainty set is missing keys {sorted(missing)}")
        return cls(
            a0=data["a0"],
            tau=data["tau"],
            A=data["A"],
            norm=data.get("norm", "l2"),
            V=data.get("V"),
            delta=data.get("delta"),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "UncertaintySet":
        return cls.from_dict(json.loads(text))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, UncertaintySet):
            return NotImplemented
        return self.to_dict() == other.to_dict()

    def __hash__(self) -> int:
        return hash(self.to_json())


@dataclass(frozen=True)
class EllipsoidalSet:
    """Classical ellipsoid ``{a : ||V (a - a0)||_2 <= delta}``.

    Used as the baseline that can leave the positive orthant.
    """

    a0: np.ndarray
    V: np.ndarray
    delta: float

    def __post_init__(self):
        a0 = np.atleast_1d(np.asarray(self.a0, dtype=float)).ravel()
        object.__setattr__(self, "a0", a0)
        object.__setattr__(self, "V", _as_matrix(self.V, a0.size, "V"))
        object.__setattr__(self, "delta", float(self.delta))

    def min_linear(self, x) -> float:
        """``min a^T x`` over the ellipsoid."""
        x = np.asarray(x, dtype=float)
        return float(self.a0 @ x - self.delta * np.linalg.norm(np.linalg.solve(self.V.T, x)))

    def argmin_linear(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        w = np.linalg.solve(self.V.T, x)
        nrm = np.linalg.norm(w)
        if nrm == 0.0:
            return self.a0.copy()
        return self.a0 - self.delta * np.linalg.solve(self.V, w / nrm)

    def contains(self, a, atol: float = MEMBERSHIP_ATOL) -> bool:
        return bool(np.linalg.norm(self.V @ (np.asarray(a, dtype=float) - self.a0)) <= self.delta + atol)


@dataclass(frozen=True)
class PointDiagnostics:
    """Result of a membership test.

    Attributes
    ----------
    z : ndarray
        Scaled point ``a / a0``.
    y : ndarray
        Coordinatewise variations ``g(z_i)``; ``inf`` where ``z_i <= 0``.
    budget : float
        ``||A y||`` in the set's norm.
    inside : bool
    ellipsoid_budget : float or None
        ``||V (z - e)||`` when the set has an ellipsoidal component.
    """

    z: np.ndarray
    y: np.ndarray
    budget: float
    inside: bool
    ellipsoid_budget: float | None = field(default=None)


def contains(uset: UncertaintySet, a, atol: float = MEMBERSHIP_ATOL) -> PointDiagnostics:
    """Test whether ``a`` belongs to ``uset``.

    The budget is evaluated at the tight variation vector ``y = g(z)``.
    This is exact when ``A`` has nonnegative entries and never reports an
    outside point as inside for general ``A``.

    Parameters
    ----------
    uset : UncertaintySet
    a : array_like
        Candidate point of dimension ``uset.m``.
    atol : float, optional
        Slack on the budget comparison.

    Returns
    -------
    PointDiagnostics
    """
    a = np.atleast_1d(np.asarray(a, dtype=float)).ravel()
    if a.size != uset.m:
        raise ValueError(f"dimension mismatch: expected {uset.m}, got {a.size}")
    z = a / uset.a0
    if np.any(~(z > 0.0)) or not np.all(np.isfinite(z)):
        return PointDiagnostics(z=z, y=np.full(uset.m, np.inf), budget=math.inf, inside=False)
    y = kernels.variation(z)
    budget = vector_norm(uset.A @ y, uset.norm)
    inside = budget <= uset.tau + atol
    ell = None
    if uset.V is not None:
        ell = vector_norm(uset.V @ (z - 1.0), uset.norm)
        inside = inside and ell <= uset.delta + atol
    return PointDiagnostics(z=z, y=y, budget=budget, inside=bool(inside), ellipsoid_budget=ell)


def _branch_mask(branch, m: int) -> np.ndarray:
    if isinstance(branch, str):
        if branch not in ("lower", "upper"):
            raise ValueError("branch must be 'lower', 'upper' or a boolean mask")
        return np.full(m, branch == "lower")
    mask = np.asarray(branch, dtype=bool).ravel()
    if mask.size != m:
        raise ValueError("branch mask has the wrong length")
    return mask


def _boundary_levels(uset: UncertaintySet, direction) -> np.ndarray:
    d = np.atleast_1d(np.asarray(direction, dtype=float)).ravel()
    if d.size != uset.m:
        raise ValueError("direction has the wrong dimension")
    if np.any(d < 0.0) or not np.any(d > 0.0):
        raise ValueError("direction must be nonnegative and nonzero")
    scale = vector_norm(uset.A @ d, uset.norm)
    if scale <= 0.0:
        raise ValueError("direction lies in the null space of A")
    return uset.tau * d / scale


def boundary_sample(uset: UncertaintySet, direction, branch="lower", tol: float = 1e-12) -> np.ndarray:
    """Map a variation-space direction to a boundary point of the set.

    The variation vector ``y`` is the multiple of ``direction`` with
    ``||A y|| = tau``; each coordinate is then inverted on the requested
    branch of ``g``.

    Parameters
    ----------
    uset : UncertaintySet
    direction : array_like
        Nonnegative, nonzero vector in variation space.
    branch : {"lower", "upper"} or array_like of bool
        Branch per coordinate; ``True`` in a mask selects the lower branch.
    tol : float, optional

    Returns
    -------
    ndarray
        Point ``a`` with ``||A g(a / a0)|| = tau``.  When ``tau = 0`` this is
        ``a0`` itself.
    """
    if uset.tau == 0.0:
        return uset.a0.copy()
    y = _boundary_levels(uset, direction)
    lower = _branch_mask(branch, uset.m)
    z = np.where(lower, kernels.inv_lower(y, tol), kernels.inv_upper(y, tol))
    return uset.a0 * z


def boundary_sample_log(uset: UncertaintySet, direction, branch="lower", tol: float = 1e-12) -> np.ndarray:
    """Same as :func:`boundary_sample` but returns ``ln a``.

    Finite even when the lower-branch point is below the smallest double.
    """
    if uset.tau == 0.0:
        return np.log(uset.a0)
    y = _boundary_levels(uset, direction)
    lower = _branch_mask(branch, uset.m)
    s = np.where(lower, log_inverse_variation_lower(y, tol), np.log(kernels.inv_upper(y, tol)))
    return np.log(uset.a0) + s


def random_set(rng: np.random.Generator, m: int, tau: float, norm: NormKind | str = NormKind.L2,
               min_singular: float = 0.5) -> UncertaintySet:
    """Random set with nonnegative ``A`` whose singular values are bounded below.

    Handy for property tests and benchmarks.
    """
    a0 = rng.uniform(0.5, 5.0, m)
    B = rng.uniform(0.0, 0.5, (m, m))
    A = B @ B.T / m + min_singular * np.eye(m)
    return UncertaintySet(a0=a0, tau=tau, A=A, norm=norm)


def as_vector(x: Sequence[float] | np.ndarray) -> np.ndarray:
    """Convert to a 1-D float array."""
    return np.atleast_1d(np.asarray(x, dtype=float)).ravel()
