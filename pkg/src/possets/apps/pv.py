"""Operation planning for a PV panel and battery system under irradiance uncertainty.

Per hour ``t`` the plan chooses the power charged into the battery ``xC``,
purchased ``xP``, supplied directly from the panels ``xR`` and supplied from
the battery ``xS``, plus the battery level ``q``.  The purchase cost is
minimised subject to demand, panel output and battery constraints; the panel
output constraint ``xC_t + xR_t <= E_t z`` is robust against the irradiance
``E`` ranging over an uncertainty set.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .._io import read_text
from ..core import UncertaintySet, as_vector
from ..solver.problem import RobustProblem, Row

__all__ = [
    "DEFAULT_PANEL_AREA",
    "PvInstance",
    "PvPlan",
    "EvaluationReport",
    "step_tariff",
    "build_pv_problem",
    "extract_plan",
    "evaluate_violation_rate",
    "adjust_plan",
    "evaluate_actual_cost",
    "read_pv_csv",
    "write_pv_csv",
    "instance_to_json",
    "instance_from_json",
]

BLOCKS = ("xC", "xP", "xR", "xS", "q")

#: Panel area [m^2] used when none is given.
DEFAULT_PANEL_AREA = 2.0


def step_tariff(T: int = 24, low: float = 10.7, high: float = 32.0, low_hours=(0, 1, 2, 3, 4, 5, 6, 7, 23)) -> np.ndarray:
    """Two-level price schedule: ``low`` in ``low_hours`` (of each day) and ``high`` otherwise."""
    hour = np.arange(T) % 24
    return np.where(np.isin(hour, low_hours), low, high).astype(float)


@dataclass(frozen=True)
class PvInstance:
    """Data of one planning day.

    Attributes
    ----------
    D : ndarray
        Demand per hour [kWh].
    E0 : ndarray
        Nominal irradiance per hour [kWh/m^2]; zero at night.
    CP : ndarray
        Purchase price per hour [yen/kWh].
    gamma : float
        Discharge efficiency in ``(0, 1]``.
    z : float
        Panel area [m^2].
    Q : float
        Battery capacity [kWh].
    irradiance_set : UncertaintySet, optional
        Set over the irradiance of the daylight hours (those with
        ``E0 > 0``, in order).  ``None`` plans for ``E0``.
    """

    D: np.ndarray
    E0: np.ndarray
    CP: np.ndarray
    gamma: float = 0.8
    z: float = DEFAULT_PANEL_AREA
    Q: float = 10.0
    irradiance_set: UncertaintySet | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("D", "E0", "CP"):
            object.__setattr__(self, name, as_vector(getattr(self, name)))
        T = self.D.size
        if self.E0.size != T or self.CP.size != T:
            raise ValueError("D, E0 and CP must have the same length")
        if np.any(self.D < 0) or np.any(self.E0 < 0) or np.any(self.CP < 0):
            raise ValueError("D, E0 and CP must be nonnegative")
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError("gamma must lie in (0, 1]")
        if not (self.z > 0.0 and self.Q > 0.0):
            raise ValueError("z and Q must be positive")
        if self.irradiance_set is not None and self.irradiance_set.m != self.daylight.size:
            raise ValueError(f"irradiance set has dimension {self.irradiance_set.m}, "
                             f"expected {self.daylight.size} daylight hours")

    @property
    def T(self) -> int:
        return self.D.size

    @property
    def daylight(self) -> np.ndarray:
        """Indices of hours with positive nominal irradiance."""
        return np.flatnonzero(self.E0 > 0.0)

    def with_set(self, uset: UncertaintySet | None) -> "PvInstance":
        return PvInstance(self.D, self.E0, self.CP, self.gamma, self.z, self.Q, uset, dict(self.meta))

    def index(self, block: str, t) -> np.ndarray:
        """Variable index of ``block`` at hour(s) ``t``."""
        return BLOCKS.index(block) * self.T + np.asarray(t)


@dataclass(frozen=True)
class PvPlan:
    """Hourly decisions: charge ``xC``, purchase ``xP``, direct supply ``xR``,
    battery supply ``xS`` and battery level ``q``."""

    xC: np.ndarray
    xP: np.ndarray
    xR: np.ndarray
    xS: np.ndarray
    q: np.ndarray

    def purchase_cost(self, CP) -> float:
        return float(as_vector(CP) @ self.xP)

    def to_dict(self) -> dict:
        return {k: getattr(self, k).tolist() for k in BLOCKS}


@dataclass(frozen=True)
class EvaluationReport:
    """Plan quality against one realized irradiance profile.

    Attributes
    ----------
    max_violation_rate : float
        Percent; nonpositive iff the realized panel constraint holds at every
        hour.
    actual_cost : float
        Purchase cost after adjusting the plan to the realization.
    nominal_cost : float
        Reference cost (usually the nominal plan's actual cost); ``nan`` if
        not supplied.
    relative_cost_diff : float
        ``(actual - nominal) / nominal`` in percent.
    violation_per_hour : ndarray
        Per-hour violation rates (``-inf`` at night).
    adjusted : PvPlan
    """

    max_violation_rate: float
    actual_cost: float
    nominal_cost: float
    relative_cost_diff: float
    violation_per_hour: np.ndarray
    adjusted: PvPlan

    def to_dict(self) -> dict:
        return {
            "max_violation_rate": self.max_violation_rate,
            "actual_cost": self.actual_cost,
            "nominal_cost": self.nominal_cost,
            "relative_cost_diff": self.relative_cost_diff,
            "violation_per_hour": [None if not math.isfinite(v) else v for v in self.violation_per_hour],
            "adjusted_plan": self.adjusted.to_dict(),
        }


def build_pv_problem(inst: PvInstance) -> RobustProblem:
    """Linear program of the planning day with robust panel rows.

    Variables are stacked as ``(xC, xP, xR, xS, q)``, each of length ``T``,
    all nonnegative; ``q_t <= Q``.  The battery recursion starts from an
    empty battery.  For a daylight hour ``t`` the panel row reads
    ``xC_t + xR_t - z E_t <= 0`` with ``E`` in ``inst.irradiance_set``; at night
    it is the certain row ``xC_t + xR_t <= 0``.
    """
    T = inst.T
    n = 5 * T
    ix = inst.index
    c = np.zeros(n)
    c[ix("xP", np.arange(T))] = inst.CP
    lower = np.zeros(n)
    upper = np.full(n, math.inf)
    upper[ix("q", np.arange(T))] = inst.Q
    rows = []
    for t in range(T):
        g = np.zeros(n)
        g[ix("xR", t)] = 1.0
        g[ix("xS", t)] = inst.gamma
        g[ix("xP", t)] = 1.0
        rows.append(Row(g, ">=", float(inst.D[t]), name=f"demand[{t}]"))
    day = inst.daylight
    pos = {int(t): k for k, t in enumerate(day)}
    uset = inst.irradiance_set
    if uset is None and day.size:
        uset = UncertaintySet(inst.E0[day], 0.0, np.eye(day.size))
    for t in range(T):
        g = np.zeros(n)
        g[ix("xC", t)] = 1.0
        g[ix("xR", t)] = 1.0
        if t in pos:
            qv = np.zeros(day.size)
            qv[pos[t]] = -inst.z
            rows.append(Row(g, "<=", 0.0, uset, "increasing", np.zeros((day.size, n)), qv, name=f"panel[{t}]"))
        else:
            rows.append(Row(g, "<=", 0.0, name=f"panel[{t}]"))
    for t in range(T):
        g = np.zeros(n)
        g[ix("q", t)] = 1.0
        if t > 0:
            g[ix("q", t - 1)] = -1.0
        g[ix("xC", t)] = -1.0
        g[ix("xS", t)] = 1.0
        rows.append(Row(g, "=", 0.0, name=f"battery[{t}]"))
    return RobustProblem(c, tuple(rows), lower, upper, "min")


def extract_plan(inst: PvInstance, x) -> PvPlan:
    """Split a solution vector into its blocks (tiny negatives clipped to 0)."""
    x = np.maximum(as_vector(x), 0.0)
    T = inst.T
    return PvPlan(*(x[k * T:(k + 1) * T].copy() for k in range(5)))


def evaluate_violation_rate(plan: PvPlan, E_realized, E0, z: float) -> float:
    """Largest relative excess of panel use over the realized output [%].

    ``max_t (xC_t + xR_t - E_t z) / (E0_t z) * 100`` over hours with
    ``E0_t > 0``; at night the panel can deliver nothing and the plan keeps
    ``xC_t + xR_t = 0``.

    Raises
    ------
    ValueError
        If no hour has positive nominal irradiance.
    """
    return float(np.max(_violation_per_hour(plan, E_realized, E0, z)))


def _violation_per_hour(plan: PvPlan, E_realized, E0, z) -> np.ndarray:
    E = as_vector(E_realized)
    E0 = as_vector(E0)
    if E.shape != E0.shape or E.shape != plan.xC.shape:
        raise ValueError("horizon lengths differ")
    day = E0 > 0.0
    if not np.any(day):
        raise ValueError("nominal irradiance is zero at every hour")
    out = np.full(E.size, -math.inf)
    out[day] = (plan.xC[day] + plan.xR[day] - E[day] * z) / (E0[day] * z) * 100.0
    return out


def adjust_plan(plan: PvPlan, E_realized, inst: PvInstance) -> PvPlan:
    """Adapt a plan to a realized irradiance profile.

    1. Where ``xC_t + xR_t`` exceeds ``E_t z`` both are scaled down by the
       same factor so that the sum equals ``E_t z``.
    2. ``xS`` is scaled uniformly so that its total equals the adjusted total
       charge.  The battery level is then recomputed and clipped to
       ``[0, Q]``.
    3. ``xP_t = max(0, D_t - xR_t - gamma xS_t)``.
    """
    E = as_vector(E_realized)
    cap = np.maximum(E, 0.0) * inst.z
    used = plan.xC + plan.xR
    scale = np.ones_like(used)
    over = used > cap
    scale[over] = cap[over] / used[over]
    xC = plan.xC * scale
    xR = plan.xR * scale
    total_s = float(plan.xS.sum())
    xS = plan.xS * (float(xC.sum()) / total_s) if total_s > 0.0 else plan.xS.copy()
    q = np.clip(np.cumsum(xC - xS), 0.0, inst.Q)
    xP = np.maximum(0.0, inst.D - xR - inst.gamma * xS)
    return PvPlan(xC, xP, xR, xS, q)


def evaluate_actual_cost(plan: PvPlan, E_realized, inst: PvInstance, nominal_cost: float = math.nan) -> EvaluationReport:
    """Violation rate and purchase cost of ``plan`` after adjustment to ``E_realized``."""
    per_hour = _violation_per_hour(plan, E_realized, inst.E0, inst.z)
    adj = adjust_plan(plan, E_realized, inst)
    cost = adj.purchase_cost(inst.CP)
    rel = (cost - nominal_cost) / nominal_cost * 100.0 if nominal_cost and math.isfinite(nominal_cost) else math.nan
    return EvaluationReport(float(np.max(per_hour)), cost, nominal_cost, rel, per_hour, adj)


def read_pv_csv(source, gamma: float = 0.8, z: float = DEFAULT_PANEL_AREA, Q: float = 10.0) -> PvInstance:
    """Read an instance from CSV with columns ``hour,demand,irradiance[,price]``.

    ``source`` is a path, an open text file or the CSV text itself (any
    string containing a line break).  Missing prices default to
    :func:`step_tariff`.  Scalars are passed as arguments.
    """
    text = read_text(source)
    reader = csv.DictReader(io.StringIO(text))
    cols = [c.strip().lower() for c in (reader.fieldnames or [])]
    if not {"hour", "demand", "irradiance"} <= set(cols):
        raise ValueError("PV CSV needs the columns hour, demand and irradiance")
    recs = []
    for r in reader:
        r = {k.strip().lower(): v for k, v in r.items()}
        recs.append(r)
    recs.sort(key=lambda r: int(float(r["hour"])))
    hours = [int(float(r["hour"])) for r in recs]
    D = np.array([float(r["demand"]) for r in recs])
    E0 = np.array([float(r["irradiance"]) for r in recs])
    if "price" in cols:
        CP = np.array([float(r["price"]) for r in recs])
    else:
        CP = step_tariff(24)[np.array(hours, dtype=int) % 24] if recs else np.zeros(0)
    return PvInstance(D, E0, CP, gamma, z, Q)


def write_pv_csv(inst: PvInstance) -> str:
    """CSV text with columns ``hour,demand,irradiance,price`` (scalars are not stored)."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["hour", "demand", "irradiance", "price"])
    for t in range(inst.T):
        w.writerow([t, repr(float(inst.D[t])), repr(float(inst.E0[t])), repr(float(inst.CP[t]))])
    return buf.getvalue()


def instance_to_json(inst: PvInstance) -> str:
    """JSON text with the series, the scalars and the irradiance set if any."""
    d = {"D": inst.D.tolist(), "E0": inst.E0.tolist(), "CP": inst.CP.tolist(),
         "gamma": inst.gamma, "z": inst.z, "Q": inst.Q}
    if inst.irradiance_set is not None:
        d["irradiance_set"] = inst.irradiance_set.to_dict()
    return json.dumps(d)


def instance_from_json(text: str) -> PvInstance:
    """Inverse of :func:`instance_to_json`; missing scalars take their defaults."""
    d = json.loads(text)
    uset = UncertaintySet.from_dict(d["irradiance_set"]) if d.get("irradiance_set") else None
    return PvInstance(d["D"], d["E0"], d["CP"], d.get("gamma", 0.8), d.get("z", DEFAULT_PANEL_AREA), d.get("Q", 10.0), uset)
