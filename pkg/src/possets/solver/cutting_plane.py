"""Robust linear programs by cutting planes from the pessimization oracle.

Every robust row starts with a single cut at its nominal value.  The LP
relaxation is solved with HiGHS; the oracle then finds, per row, the
scenario that minimises the row slack at the incumbent and adds the
corresponding linear cut if the slack is negative.  Cuts are never removed.
"""

from __future__ import annotations

import time

import numpy as np
from scipy.optimize import linprog

from ..oracle import worst_case
from .barrier import INFEASIBLE, ITERATION_CAP, NUMERICAL_FAILURE, OPTIMAL
from .common import VERIFY_ATOL, RobustRow, certain_block, normalize_robust_rows, row_objective, verify_solution
from .problem import RobustProblem, SolveResult

__all__ = ["solve_cutting_plane"]


def _cut(rr: RobustRow, a: np.ndarray) -> tuple[np.ndarray, float]:
    """``g^T x <= h`` form of ``a^T (Ps x + qs) + cs^T x >= bs``."""
    g = -(rr.cs + rr.Ps.T @ a)
    h = -rr.bs + float(a @ rr.qs)
    return g, h


def solve_cutting_plane(problem: RobustProblem, tol: float = 1e-7, max_cuts: int = 500) -> SolveResult:
    """Solve the robust program by oracle-generated cutting planes.

    Parameters
    ----------
    problem : RobustProblem
    tol : float, optional
        A robust row counts as satisfied when its worst-case slack is at
        least ``-tol * (1 + |rhs|)``.
    max_cuts : int, optional
        Total cut budget (the initial nominal cuts included).

    Returns
    -------
    SolveResult
        ``certificates`` maps each robust row to the list of scenarios used
        as cuts.  Status ``iteration_cap`` signals cut-budget exhaustion and
        ``infeasible`` an infeasible relaxation.
    """
    start = time.perf_counter()
    n = problem.n
    robust, nominal = normalize_robust_rows(problem)
    G, h, E, f = certain_block(problem, nominal)
    lower, upper = problem.boxed_bounds()
    bounds = list(zip(lower, upper))
    cost = problem.c if problem.sense == "min" else -problem.c
    scenarios = {rr.index: [rr.uset.a0.copy()] for rr in robust}
    cuts_g = [_cut(rr, rr.uset.a0)[0] for rr in robust]
    cuts_h = [_cut(rr, rr.uset.a0)[1] for rr in robust]
    n_cuts = len(cuts_g)
    iterations = 0
    x = np.zeros(n)
    status, msg = OPTIMAL, ""
    while True:
        iterations += 1
        A_ub = np.vstack([G] + ([np.array(cuts_g)] if cuts_g else []))
        b_ub = np.concatenate([h, np.array(cuts_h)])
        lp = linprog(cost, A_ub=A_ub if A_ub.size else None, b_ub=b_ub if b_ub.size else None,
                     A_eq=E if E.size else None, b_eq=f if f.size else None,
                     bounds=bounds, method="highs")
        if lp.status == 2:
            status, msg = INFEASIBLE, "LP relaxation is infeasible"
            break
        if lp.status != 0:
            status, msg = NUMERICAL_FAILURE, f"LP solver: {lp.message}"
            break
        x = np.asarray(lp.x, dtype=float)
        added = 0
        for rr in robust:
            cert = worst_case(rr.uset, row_objective(rr, x), x, tol=1e-12)
            if cert.value < -tol * (1.0 + abs(rr.bs)):
                g, hv = _cut(rr, cert.a_star)
                cuts_g.append(g)
                cuts_h.append(hv)
                scenarios[rr.index].append(cert.a_star)
                added += 1
        n_cuts += added
        if added == 0:
            break
        if n_cuts >= max_cuts:
            status, msg = ITERATION_CAP, f"cut budget of {max_cuts} exhausted"
            break
    residuals = {}
    if status == OPTIMAL:
        residuals = verify_solution(problem, x)
        worst = min(residuals.values(), default=0.0)
        if worst < -VERIFY_ATOL:
            status = NUMERICAL_FAILURE
            msg = f"oracle check failed: worst robust slack {worst:.3e}"
    return SolveResult(x, problem.objective_value(x), status, scenarios, residuals, iterations,
                       time.perf_counter() - start, "cuts", msg)
