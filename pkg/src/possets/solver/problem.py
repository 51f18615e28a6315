"""Robust linear programs and solve results, with JSON (de)serialization.

A robust row reads ``coeffs^T x + a^T (P x + q)  {<=, >=} rhs`` and must hold
for every ``a`` in its uncertainty set.  ``coeffs`` is the certain part of
the row.  ``P`` defaults to the identity (the set covers the whole
coefficient row); ``uncertain_idx`` selects a subset of columns instead.
Rows without a set are ordinary linear constraints.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import jsonschema
import numpy as np

from ..core import UncertaintySet, as_vector

__all__ = [
    "INF_SENTINEL",
    "BOX_LIMIT",
    "PROBLEM_SCHEMA",
    "Row",
    "RobustProblem",
    "SolveResult",
    "SchemaError",
]

#: Bounds with magnitude at least this value are infinite in JSON.
INF_SENTINEL = 1e18
#: Infinite bounds are replaced by this box inside both solvers.
BOX_LIMIT = 1e6

_NUM = {"type": "number"}
_VEC = {"type": "array", "items": _NUM}
_MAT = {"type": "array", "items": _VEC}
_BOUND = {"anyOf": [_NUM, {"type": "null"}]}

_SET_SCHEMA = {
    "type": "object",
    "required": ["a0", "tau", "A"],
    "properties": {
        "a0": _VEC,
        "tau": _NUM,
        "A": _MAT,
        "norm": {"enum": ["l1", "l2", "linf"]},
        "V": _MAT,
        "delta": _NUM,
    },
}

PROBLEM_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["c", "rows"],
    "properties": {
        "sense": {"enum": ["min", "max"]},
        "c": _VEC,
        "bounds": {"type": "array", "items": {"type": "array", "items": _BOUND, "minItems": 2, "maxItems": 2}},
        "rows": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["coeffs", "sense", "rhs"],
                "properties": {
                    "name": {"type": "string"},
                    "coeffs": _VEC,
                    "sense": {"enum": ["<=", ">=", "="]},
                    "rhs": _NUM,
                    "uncertainty": _SET_SCHEMA,
                    "monotone": {"enum": ["increasing", "decreasing", "general"]},
                    "uncertain_idx": {"type": "array", "items": {"type": "integer", "minimum": 0}},
                    "P": _MAT,
                    "q": _VEC,
                },
            },
        },
    },
}


class SchemaError(ValueError):
    """Input that violates the problem schema or its consistency rules."""


@dataclass(frozen=True)
class Row:
    """One linear constraint, optionally robust.

    Attributes
    ----------
    coeffs : ndarray
        Certain coefficients, length ``n``.
    sense : str
        ``"<="``, ``">="`` or ``"="``.
    rhs : float
    uncertainty : UncertaintySet, optional
    monotone : str, optional
        ``"increasing"``, ``"decreasing"`` or ``"general"``.
    P : ndarray, optional
        ``m x n`` map from ``x`` to the multiplier of ``a``.
    q : ndarray, optional
        Offset of that multiplier, length ``m``.
    name : str
    """

    coeffs: np.ndarray
    sense: str
    rhs: float
    uncertainty: UncertaintySet | None = None
    monotone: str | None = None
    P: np.ndarray | None = None
    q: np.ndarray | None = None
    name: str = ""

    @property
    def is_robust(self) -> bool:
        return self.uncertainty is not None

    @property
    def sign(self) -> float:
        """``+1`` for ``>=`` rows and ``-1`` for ``<=`` rows."""
        return 1.0 if self.sense == ">=" else -1.0

    def multiplier_map(self) -> tuple[np.ndarray, np.ndarray]:
        """``(P, q)`` with the defaults filled in."""
        n = self.coeffs.size
        m = self.uncertainty.m
        P = np.eye(m, n) if self.P is None else self.P
        q = np.zeros(m) if self.q is None else self.q
        return P, q

    def realized(self, a, x) -> float:
        """Left-hand side for a realized parameter ``a``."""
        x = as_vector(x)
        val = float(self.coeffs @ x)
        if self.uncertainty is not None:
            P, q = self.multiplier_map()
            val += float(as_vector(a) @ (P @ x + q))
        return val

    def nominal_coeffs(self) -> tuple[np.ndarray, float]:
        """Coefficients and constant of the row at ``a = a0``."""
        if self.uncertainty is None:
            return self.coeffs, 0.0
        P, q = self.multiplier_map()
        a0 = self.uncertainty.a0
        return self.coeffs + P.T @ a0, float(a0 @ q)

    def to_dict(self) -> dict:
        d = {"coeffs": self.coeffs.tolist(), "sense": self.sense, "rhs": self.rhs}
        if self.name:
            d["name"] = self.name
        if self.uncertainty is not None:
            d["uncertainty"] = self.uncertainty.to_dict()
            if self.monotone:
                d["monotone"] = self.monotone
            if self.P is not None:
                d["P"] = self.P.tolist()
            if self.q is not None:
                d["q"] = self.q.tolist()
        return d


def _finite_bound(v, default: float) -> float:
    if v is None:
        return default
    v = float(v)
    if v >= INF_SENTINEL:
        return math.inf
    if v <= -INF_SENTINEL:
        return -math.inf
    return v


@dataclass(frozen=True)
class RobustProblem:
    """Linear objective with certain and robust linear constraints.

    Attributes
    ----------
    c : ndarray
        Objective coefficients.
    rows : tuple of Row
    lower, upper : ndarray
        Variable bounds; ``-inf``/``inf`` allowed.
    sense : str
        ``"min"`` or ``"max"``.
    """

    c: np.ndarray
    rows: tuple
    lower: np.ndarray
    upper: np.ndarray
    sense: str = "min"

    def __post_init__(self):
        n = self.c.size
        if self.sense not in ("min", "max"):
            raise SchemaError("sense must be 'min' or 'max'")
        if self.lower.size != n or self.upper.size != n:
            raise SchemaError("bounds must have one entry per variable")
        if np.any(self.lower > self.upper):
            raise SchemaError("a lower bound exceeds its upper bound")
        for k, r in enumerate(self.rows):
            if r.coeffs.size != n:
                raise SchemaError(f"row {k}: expected {n} coefficients, got {r.coeffs.size}")
            if r.sense not in ("<=", ">=", "="):
                raise SchemaError(f"row {k}: unknown sense {r.sense!r}")
            if r.uncertainty is None:
                if r.P is not None or r.q is not None or r.monotone is not None:
                    raise SchemaError(f"row {k}: P, q and monotone need an uncertainty set")
                continue
            if r.sense == "=":
                raise SchemaError(f"row {k}: equality rows cannot be robust")
            P, q = r.multiplier_map()
            m = r.uncertainty.m
            if P.shape != (m, n) or q.shape != (m,):
                raise SchemaError(f"row {k}: the set has dimension {m} but the row maps {P.shape[0]} coefficients")

    @property
    def n(self) -> int:
        return self.c.size

    @property
    def robust_rows(self) -> list[int]:
        return [k for k, r in enumerate(self.rows) if r.is_robust]

    def objective_value(self, x) -> float:
        return float(self.c @ as_vector(x))

    def with_tau(self, tau: float) -> "RobustProblem":
        """Copy with every robust row's budget replaced by ``tau``."""
        rows = tuple(
            r if r.uncertainty is None else Row(r.coeffs, r.sense, r.rhs, r.uncertainty.with_tau(tau),
                                                r.monotone, r.P, r.q, r.name)
            for r in self.rows
        )
        return RobustProblem(self.c, rows, self.lower, self.upper, self.sense)

    def boxed_bounds(self) -> tuple[np.ndarray, np.ndarray]:
        """Bounds with infinite entries replaced by ``-/+BOX_LIMIT``."""
        return np.maximum(self.lower, -BOX_LIMIT), np.minimum(self.upper, BOX_LIMIT)

    # -- serialization -------------------------------------------------
    @classmethod
    def from_dict(cls, d: dict) -> "RobustProblem":
        try:
            jsonschema.validate(d, PROBLEM_SCHEMA)
        except jsonschema.ValidationError as exc:
            path = "/".join(str(p) for p in exc.absolute_path)
            raise SchemaError(f"{path or '<root>'}: {exc.message}") from exc
        c = as_vector(d["c"])
        n = c.size
        bounds = d.get("bounds")
        if bounds is None:
            lower, upper = np.zeros(n), np.full(n, math.inf)
        else:
            if len(bounds) != n:
                raise SchemaError(f"bounds: expected {n} pairs, got {len(bounds)}")
            lower = np.array([_finite_bound(b[0], -math.inf) for b in bounds])
            upper = np.array([_finite_bound(b[1], math.inf) for b in bounds])
        rows = []
        for k, rd in enumerate(d["rows"]):
            uset = None
            P = q = None
            if "uncertainty" in rd:
                try:
                    uset = UncertaintySet.from_dict(rd["uncertainty"])
                except (ValueError, TypeError) as exc:
                    raise SchemaError(f"rows/{k}/uncertainty: {exc}") from exc
                if "P" in rd and "uncertain_idx" in rd:
                    raise SchemaError(f"rows/{k}: give either P or uncertain_idx, not both")
                if "P" in rd:
                    P = np.atleast_2d(np.asarray(rd["P"], dtype=float))
                elif "uncertain_idx" in rd:
                    idx = [int(i) for i in rd["uncertain_idx"]]
                    if any(i >= n for i in idx):
                        raise SchemaError(f"rows/{k}/uncertain_idx: index out of range")
                    P = np.zeros((len(idx), n))
                    P[np.arange(len(idx)), idx] = 1.0
                if "q" in rd:
                    q = as_vector(rd["q"])
            elif any(key in rd for key in ("P", "q", "monotone", "uncertain_idx")):
                raise SchemaError(f"rows/{k}: P, q, uncertain_idx and monotone need an uncertainty set")
            rows.append(Row(as_vector(rd["coeffs"]), rd["sense"], float(rd["rhs"]), uset,
                            rd.get("monotone"), P, q, rd.get("name", "")))
        return cls(c, tuple(rows), lower, upper, d.get("sense", "min"))

    def to_dict(self) -> dict:
        def enc(v):
            return None if not math.isfinite(v) else float(v)

        return {
            "sense": self.sense,
            "c": self.c.tolist(),
            "bounds": [[enc(lo), enc(hi)] for lo, hi in zip(self.lower, self.upper)],
            "rows": [r.to_dict() for r in self.rows],
        }

    @classmethod
    def from_json(cls, text: str) -> "RobustProblem":
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"invalid JSON: {exc}") from exc
        return cls.from_dict(d)

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)


@dataclass
class SolveResult:
    """Outcome of a robust solve.

    Attributes
    ----------
    x_star : ndarray
    objective_value : float
        ``c^T x_star`` in the problem's own sense.
    status : str
        ``optimal``, ``infeasible``, ``iteration_cap`` or ``numerical_failure``.
    certificates : dict
        Dual certificates per robust row (dual method) or the list of cut
        scenarios per robust row (cutting-plane method).
    residuals : dict
        Worst-case slack ``min_a (row - rhs)`` (sign-adjusted so that
        nonnegative means satisfied) per robust row, from an independent
        oracle call.
    iterations : int
    wall_time : float
    method : str
    message : str
    """

    x_star: np.ndarray
    objective_value: float
    status: str
    certificates: dict = field(default_factory=dict)
    residuals: dict = field(default_factory=dict)
    iterations: int = 0
    wall_time: float = 0.0
    method: str = ""
    message: str = ""

    def to_dict(self) -> dict:
        certs = {}
        for k, c in self.certificates.items():
            certs[str(k)] = c.to_dict() if hasattr(c, "to_dict") else [np.asarray(a).tolist() for a in c]
        return {
            "status": self.status,
            "method": self.method,
            "x_star": self.x_star.tolist(),
            "objective_value": self.objective_value,
            "residuals": {str(k): v for k, v in self.residuals.items()},
            "certificates": certs,
            "iterations": self.iterations,
            "wall_time": self.wall_time,
            "message": self.message,
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)
