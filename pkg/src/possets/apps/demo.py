"""Ellipsoidal versus positivity-preserving sets on a covering constraint.

The demonstration program is

    minimise  e^T x   subject to  a^T x >= b  for every a in the set,  x >= 0,

with a positive nominal vector ``a0`` and ``b > 0``.  An ellipsoid
``||Sigma^{-1/2}(a - a0)||_2 <= delta`` with ``delta > ||Sigma^{-1/2} a0||_2``
contains ``a = 0``, at which no ``x`` satisfies the row, so the robust program
is infeasible.  The variation set only holds positive vectors and the robust
program stays feasible for every budget.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..core import EllipsoidalSet, NormKind, UncertaintySet
from ..solver.barrier import INFEASIBLE, SmoothProgram, smooth_convex_solve
from ..solver.dual_form import solve_dual_form
from ..solver.problem import BOX_LIMIT, RobustProblem, Row

__all__ = [
    "DEMO_A0",
    "DEMO_COV",
    "DEMO_RHS",
    "DEMO_SHAPE_SCALE",
    "DEMO_TAUS",
    "InfeasibilityDemo",
    "ellipsoid_threshold",
    "ellipsoid_robust_status",
    "omega_problem",
    "infeasibility_demo",
]

#: Nominal coefficients of the covering row.
DEMO_A0 = np.array([3.0, 2.0])
#: Covariance of the ellipsoid.
DEMO_COV = np.diag([1.0, 0.5])
#: Right-hand side of the covering row.
DEMO_RHS = 1.0
#: The variation set uses the shape ``DEMO_SHAPE_SCALE * I``; a large scale
#: keeps the worst case inside double precision range up to ``tau = 1e3``.
DEMO_SHAPE_SCALE = 100.0
#: Budgets of the feasibility sweep.
DEMO_TAUS = (1e-3, 1e-2, 1e-1, 1.0, 1e1, 1e2, 1e3)


def _inv_sqrt(S: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh(S)
    return (vecs / np.sqrt(vals)) @ vecs.T


def ellipsoid_threshold(a0=DEMO_A0, cov=DEMO_COV) -> float:
    """``||Sigma^{-1/2} a0||_2``; larger radii put ``0`` inside the ellipsoid."""
    return float(np.linalg.norm(_inv_sqrt(np.asarray(cov, dtype=float)) @ np.asarray(a0, dtype=float)))


def ellipsoid_robust_status(eset: EllipsoidalSet, b: float = DEMO_RHS) -> str:
    """Barrier status of the ellipsoidal robust counterpart.

    The row ``min_a a^T x >= b`` over the ellipsoid is the cone
    ``delta ||V^{-T} x||_2 <= a0^T x - b``; variables live in the usual box.
    """
    m = eset.a0.size
    prog = SmoothProgram(m)
    prog.add_linear_objective(np.arange(m), np.ones(m))
    prog.add_soc(eset.delta * np.linalg.inv(eset.V.T), np.zeros(m), eset.a0, -b)
    prog.add_linear_ineq(np.vstack([-np.eye(m), np.eye(m)]), np.concatenate([np.zeros(m), np.full(m, BOX_LIMIT)]))
    return smooth_convex_solve(prog, x0=np.ones(m)).status


def omega_problem(tau: float, a0=DEMO_A0, b: float = DEMO_RHS, shape_scale: float = DEMO_SHAPE_SCALE) -> RobustProblem:
    """The covering program with the variation set of budget ``tau``."""
    a0 = np.asarray(a0, dtype=float)
    m = a0.size
    uset = UncertaintySet(a0, tau, shape_scale * np.eye(m), NormKind.L2)
    row = Row(np.zeros(m), ">=", b, uset, "increasing", name="cover")
    return RobustProblem(np.ones(m), (row,), np.zeros(m), np.full(m, np.inf), "min")


@dataclass
class InfeasibilityDemo:
    """Outcome of :func:`infeasibility_demo`."""

    delta: float
    threshold: float
    zero_in_ellipsoid: bool
    ellipsoid_status: str
    omega: list[dict] = field(default_factory=list)

    @property
    def ellipsoid_infeasible(self) -> bool:
        return self.zero_in_ellipsoid and self.ellipsoid_status == INFEASIBLE

    @property
    def omega_feasible(self) -> bool:
        return all(r["status"] == "optimal" for r in self.omega)

    def to_dict(self) -> dict:
        return {
            "delta": self.delta,
            "threshold": self.threshold,
            "zero_in_ellipsoid": self.zero_in_ellipsoid,
            "ellipsoid_status": self.ellipsoid_status,
            "ellipsoid_infeasible": self.ellipsoid_infeasible,
            "omega": self.omega,
            "omega_feasible": self.omega_feasible,
        }


def infeasibility_demo(radius_factor: float = 1.1, taus=DEMO_TAUS) -> InfeasibilityDemo:
    """Run the contrast.

    Parameters
    ----------
    radius_factor : float, optional
        Ellipsoid radius as a multiple of :func:`ellipsoid_threshold`.
    taus : sequence of float, optional
        Budgets of the variation set.

    Returns
    -------
    InfeasibilityDemo
        ``omega`` holds one record per budget with the solver status,
        optimal value and solution.
    """
    thr = ellipsoid_threshold()
    delta = radius_factor * thr
    eset = EllipsoidalSet(DEMO_A0, _inv_sqrt(DEMO_COV), delta)
    zero_in = eset.contains(np.zeros_like(DEMO_A0))
    status = ellipsoid_robust_status(eset)
    records = []
    for tau in taus:
        res = solve_dual_form(omega_problem(float(tau)))
        records.append({"tau": float(tau), "status": res.status, "objective": float(res.objective_value),
                        "x": res.x_star.tolist(), "worst_slack": min(res.residuals.values(), default=float("nan"))})
    return InfeasibilityDemo(delta, thr, zero_in, status, records)
