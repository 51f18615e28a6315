"""Plan evaluation over irradiance draws and budget sweeps for the PV planner.

Robust plans use the lognormal irradiance model: the set is centred at the
median with the log-space shape (see
:func:`~possets.apps.data.calibrated_pv_instance`).  The nominal plan uses
the expected irradiance ``E0``.  Every plan is scored on the same seeded
held-out draws, and each robust plan's adjusted cost is compared with the
nominal plan's adjusted cost on the same draw.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..calibration import tau_guarantee
from ..solver.barrier import OPTIMAL
from ..solver.cutting_plane import solve_cutting_plane
from ..solver.dual_form import solve_dual_form
from ..solver.problem import SolveResult
from .data import DEFAULT_IRRADIANCE_CV, calibrated_pv_instance, irradiance_draws, irradiance_spec
from .pv import PvInstance, PvPlan, build_pv_problem, evaluate_actual_cost, extract_plan

__all__ = [
    "DEFAULT_PV_TAUS",
    "DrawSummary",
    "PvSweep",
    "solve_pv_plan",
    "summarize_draws",
    "pv_guarantee_tau",
    "pv_tau_sweep",
]

#: Budgets of the default PV sweep.
DEFAULT_PV_TAUS = (0.0, 0.05, 0.1, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0)


def solve_pv_plan(inst: PvInstance, method: str = "dual", tol: float = 1e-8) -> tuple[PvPlan, SolveResult]:
    """Optimal plan of ``inst`` (with its own irradiance set, if any)."""
    prob = build_pv_problem(inst)
    if method == "dual":
        res = solve_dual_form(prob, tol=tol)
    elif method == "cuts":
        res = solve_cutting_plane(prob, tol=max(tol, 1e-7))
    else:
        raise ValueError(f"unknown method {method!r}")
    return extract_plan(inst, res.x_star), res


@dataclass
class DrawSummary:
    """Averages of a plan's evaluation over the held-out draws."""

    planned_cost: float
    mean_max_violation: float
    mean_actual_cost: float
    mean_relative_cost_diff: float
    status: str

    def to_dict(self) -> dict:
        return {
            "planned_cost": self.planned_cost,
            "mean_max_violation": self.mean_max_violation,
            "mean_actual_cost": self.mean_actual_cost,
            "mean_relative_cost_diff": self.mean_relative_cost_diff,
            "status": self.status,
        }


def summarize_draws(plan: PvPlan, inst: PvInstance, draws, reference_costs=None, status: str = OPTIMAL) -> DrawSummary:
    """Mean violation rate and adjusted cost of ``plan`` over ``draws``.

    Parameters
    ----------
    plan : PvPlan
    inst : PvInstance
    draws : ndarray, shape (n, T)
        Realized irradiance profiles.
    reference_costs : array_like, optional
        Per-draw cost of a reference plan for the relative cost difference.
    status : str, optional
        Solver status recorded with the summary.
    """
    draws = np.atleast_2d(draws)
    ref = np.full(draws.shape[0], math.nan) if reference_costs is None else np.asarray(reference_costs, dtype=float)
    reports = [evaluate_actual_cost(plan, E, inst, float(r)) for E, r in zip(draws, ref)]
    rel = [r.relative_cost_diff for r in reports]
    return DrawSummary(
        plan.purchase_cost(inst.CP),
        float(np.mean([r.max_violation_rate for r in reports])),
        float(np.mean([r.actual_cost for r in reports])),
        float(np.mean(rel)) if reference_costs is not None else math.nan,
        status,
    )


def pv_guarantee_tau(inst: PvInstance, epsilon: float = 0.1, cv: float = DEFAULT_IRRADIANCE_CV) -> float:
    """Budget with coverage probability ``1 - epsilon`` under the irradiance model."""
    spec = irradiance_spec(inst, cv)
    return tau_guarantee(epsilon, spec.m, spec.lam)


@dataclass
class PvSweep:
    """Nominal reference and one robust summary per budget."""

    nominal: DrawSummary
    taus: list[float] = field(default_factory=list)
    robust: list[DrawSummary] = field(default_factory=list)
    plans: list[PvPlan] = field(default_factory=list)

    def rows(self) -> list[tuple[float, str, float]]:
        """Table rows ``(tau, metric, value)``; nominal metrics repeat per budget."""
        out = []
        for tau, s in zip(self.taus, self.robust):
            out += [
                (tau, "planned_cost", s.planned_cost),
                (tau, "mean_max_violation", s.mean_max_violation),
                (tau, "mean_actual_cost", s.mean_actual_cost),
                (tau, "mean_relative_cost_diff", s.mean_relative_cost_diff),
                (tau, "nominal_mean_max_violation", self.nominal.mean_max_violation),
                (tau, "nominal_mean_actual_cost", self.nominal.mean_actual_cost),
            ]
        return out


def pv_tau_sweep(inst: PvInstance, taus=DEFAULT_PV_TAUS, n_draws: int = 100, seed: int = 0,
                 cv: float = DEFAULT_IRRADIANCE_CV, method: str = "dual") -> PvSweep:
    """Solve the nominal plan and one robust plan per budget, then score them.

    Every budget is solved from scratch.  Points whose solver status is not
    optimal are reported with ``nan`` metrics.
    """
    draws = irradiance_draws(inst, n_draws, seed, cv)
    nominal_plan, res = solve_pv_plan(inst.with_set(None), method)
    ref_costs = [evaluate_actual_cost(nominal_plan, E, inst).actual_cost for E in draws]
    sweep = PvSweep(summarize_draws(nominal_plan, inst, draws, status=res.status))
    for tau in taus:
        plan, res = solve_pv_plan(calibrated_pv_instance(inst, float(tau), cv), method)
        if res.status == OPTIMAL:
            summary = summarize_draws(plan, inst, draws, ref_costs, res.status)
        else:
            summary = DrawSummary(math.nan, math.nan, math.nan, math.nan, res.status)
        sweep.taus.append(float(tau))
        sweep.robust.append(summary)
        sweep.plans.append(plan)
    return sweep
