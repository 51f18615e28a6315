"""Robust program schema and the two robust solvers."""

import copy
import json
import math
import sys
from pathlib import Path

import numpy as np
import pytest
from scipy.optimize import linprog

from possets.core import inverse_variation_lower
from possets.solver import RobustProblem, SchemaError, solve_cutting_plane, solve_dual_form
from possets.solver.barrier import INFEASIBLE, ITERATION_CAP, OPTIMAL
from possets.solver.common import verify_solution

sys.path.insert(0, str(Path(__file__).parent))
from _instances import knapsack_dict, random_robust_problem  # noqa: E402

SOLVERS = {"dual": solve_dual_form, "cuts": solve_cutting_plane}


def _nominal_lp(problem: RobustProblem) -> float:
    """Optimal value of the nominal program (every set replaced by its centre)."""
    G, h, E, f = [], [], [], []
    for row in problem.rows:
        coeffs, const = row.nominal_coeffs()
        rhs = row.rhs - const
        if row.sense == "=":
            E.append(coeffs)
            f.append(rhs)
        elif row.sense == "<=":
            G.append(coeffs)
            h.append(rhs)
        else:
            G.append(-coeffs)
            h.append(-rhs)
    sgn = 1.0 if problem.sense == "min" else -1.0
    lp = linprog(sgn * problem.c, A_ub=np.array(G) if G else None, b_ub=h or None,
                 A_eq=np.array(E) if E else None, b_eq=f or None,
                 bounds=list(zip(problem.lower, problem.upper)), method="highs")
    assert lp.status == 0
    return sgn * lp.fun


# ------------------------------------------------------------ schema
def _base():
    return copy.deepcopy(knapsack_dict())


@pytest.mark.parametrize("mutate", [
    lambda d: d.pop("c"),
    lambda d: d.update(sense="minimize"),
    lambda d: d["rows"][0].update(coeffs=[1.0, 2.0]),
    lambda d: d["rows"][0].update(sense="<"),
    lambda d: d["rows"][0].update(P=[[1.0]], uncertain_idx=[0]),
    lambda d: d["rows"][0].update(uncertain_idx=[3]),
    lambda d: d["rows"][0].update(sense="="),
    lambda d: d["rows"][0]["uncertainty"].update(a0=[-1.0]),
    lambda d: d["rows"][0]["uncertainty"].update(A=[[1.0, 0.0]]),
    lambda d: d["rows"][0]["uncertainty"].update(norm="l3"),
    lambda d: d["rows"][0].update(P=[[1.0], [1.0]]),
    lambda d: d.update(bounds=[[0, 1], [0, 1]]),
    lambda d: d.update(bounds=[[2, 1]]),
    lambda d: d["rows"].append({"coeffs": [1.0], "sense": "<=", "rhs": 1.0, "monotone": "increasing"}),
    lambda d: d["rows"].append({"coeffs": [1.0], "sense": "<=", "rhs": "one"}),
])
def test_schema_errors(mutate):
    d = _base()
    mutate(d)
    with pytest.raises(SchemaError):
        RobustProblem.from_dict(d)


def test_invalid_json_text():
    with pytest.raises(SchemaError):
        RobustProblem.from_json("{not json")


def test_json_round_trip():
    rng = np.random.default_rng(0)
    prob = random_robust_problem(rng, 1)
    back = RobustProblem.from_json(prob.to_json())
    assert back.to_dict() == prob.to_dict()
    res_a = solve_dual_form(prob)
    res_b = solve_dual_form(back)
    assert res_a.objective_value == res_b.objective_value


def test_infinite_bounds_encoding():
    d = {"c": [1.0, 1.0], "bounds": [[None, 1e18], [-1e18, 2.0]],
         "rows": [{"coeffs": [1.0, 1.0], "sense": ">=", "rhs": 1.0}]}
    prob = RobustProblem.from_dict(d)
    assert prob.lower[0] == -math.inf and prob.upper[0] == math.inf and prob.lower[1] == -math.inf
    assert prob.to_dict()["bounds"] == [[None, None], [None, 2.0]]
    assert RobustProblem.from_dict({"c": [1.0], "rows": []}).lower[0] == 0.0


def test_default_identity_map():
    d = _base()
    prob = RobustProblem.from_dict(d)
    P, q = prob.rows[0].multiplier_map()
    np.testing.assert_array_equal(P, [[1.0]])
    np.testing.assert_array_equal(q, [0.0])
    assert prob.rows[0].realized([3.0], [0.5]) == 1.5


# ------------------------------------------------------------ closed forms
@pytest.mark.parametrize("method", SOLVERS)
def test_knapsack_closed_form(method):
    prob = RobustProblem.from_dict(knapsack_dict())
    res = SOLVERS[method](prob)
    expected = 0.5 / (2.0 * inverse_variation_lower(0.5))
    assert res.status == OPTIMAL
    assert expected == pytest.approx(0.82861146, abs=1e-7)
    assert res.x_star[0] == pytest.approx(expected, abs=1e-5)
    assert res.objective_value == pytest.approx(expected, abs=1e-5)


@pytest.mark.parametrize("tau", [0.1, 0.5, 1.0, 2.0])
def test_knapsack_solvers_agree(tau):
    prob = RobustProblem.from_dict(knapsack_dict(tau=tau, rhs=0.05))
    a = solve_dual_form(prob)
    b = solve_cutting_plane(prob)
    assert a.status == b.status == OPTIMAL
    assert a.objective_value == pytest.approx(b.objective_value, abs=1e-4)
    assert a.objective_value == pytest.approx(0.05 / (2.0 * inverse_variation_lower(tau)), abs=1e-5)


@pytest.mark.parametrize("method", SOLVERS)
@pytest.mark.parametrize("seed", range(6))
def test_zero_budget_is_nominal_lp(method, seed):
    prob = random_robust_problem(np.random.default_rng(seed), seed).with_tau(0.0)
    res = SOLVERS[method](prob)
    assert res.status == OPTIMAL
    assert res.objective_value == pytest.approx(_nominal_lp(prob), abs=1e-6)


def test_no_uncertain_rows_is_one_lp():
    d = {"c": [1.0, 2.0], "bounds": [[0, 5], [0, 5]],
         "rows": [{"coeffs": [1.0, 1.0], "sense": ">=", "rhs": 2.0},
                  {"coeffs": [1.0, -1.0], "sense": "=", "rhs": 0.5}]}
    prob = RobustProblem.from_dict(d)
    cuts = solve_cutting_plane(prob)
    assert cuts.iterations == 1
    assert cuts.objective_value == pytest.approx(_nominal_lp(prob), abs=1e-9)
    dual = solve_dual_form(prob)
    assert dual.objective_value == pytest.approx(cuts.objective_value, abs=1e-6)
    assert cuts.residuals == {} and dual.residuals == {}


def test_maximization_sense():
    d = {"sense": "max", "c": [1.0], "bounds": [[0, 10]],
         "rows": [{"coeffs": [0.0], "sense": "<=", "rhs": 4.0,
                   "uncertainty": {"a0": [2.0], "tau": 0.5, "A": [[1.0]]}, "monotone": "increasing"}]}
    prob = RobustProblem.from_dict(d)
    from possets.core import inverse_variation_upper
    expected = 4.0 / (2.0 * inverse_variation_upper(0.5))
    for solve in SOLVERS.values():
        res = solve(prob)
        assert res.status == OPTIMAL
        assert res.objective_value == pytest.approx(expected, abs=1e-5)


# ------------------------------------------------------------ random instances
@pytest.mark.parametrize("seed", range(12))
def test_cross_solver_agreement(seed):
    prob = random_robust_problem(np.random.default_rng(1000 + seed), seed)
    a = solve_dual_form(prob)
    b = solve_cutting_plane(prob)
    assert a.status == b.status
    if a.status == OPTIMAL:
        assert a.objective_value == pytest.approx(b.objective_value, abs=1e-4)
        for res in (a, b):
            assert min(res.residuals.values()) >= -1e-6
            np.testing.assert_allclose(list(verify_solution(prob, res.x_star).values()),
                                       list(res.residuals.values()), atol=1e-9)


def test_optimum_nondecreasing_in_tau():
    prob = random_robust_problem(np.random.default_rng(90), 0)
    vals = []
    for tau in np.linspace(0.0, 3.0, 20):
        res = solve_dual_form(prob.with_tau(float(tau)))
        if res.status != OPTIMAL:
            break
        vals.append(res.objective_value)
    assert len(vals) >= 2
    assert np.all(np.diff(vals) >= -1e-7)


@pytest.mark.parametrize("method", SOLVERS)
def test_determinism(method):
    prob = random_robust_problem(np.random.default_rng(7), 3)
    a = SOLVERS[method](prob)
    b = SOLVERS[method](prob)
    assert a.iterations == b.iterations
    assert abs(a.objective_value - b.objective_value) <= 1e-12
    np.testing.assert_array_equal(a.x_star, b.x_star)


@pytest.mark.parametrize("method", SOLVERS)
def test_infeasible_program(method):
    d = knapsack_dict(rhs=5.0)
    res = SOLVERS[method](RobustProblem.from_dict(d))
    assert res.status == INFEASIBLE


def test_cut_budget_exhaustion():
    prob = RobustProblem.from_dict(knapsack_dict())
    res = solve_cutting_plane(prob, max_cuts=1)
    assert res.status == ITERATION_CAP


def test_result_serialization():
    prob = RobustProblem.from_dict(knapsack_dict())
    for solve in SOLVERS.values():
        d = json.loads(solve(prob).to_json())
        assert set(d) == {"status", "method", "x_star", "objective_value", "residuals", "certificates",
                          "iterations", "wall_time", "message"}
        assert d["status"] == OPTIMAL and "0" in d["residuals"] and "0" in d["certificates"]


def test_dual_certificates_present():
    prob = RobustProblem.from_dict(knapsack_dict())
    res = solve_dual_form(prob)
    cert = res.certificates[0]
    assert np.all(cert.u > 0.0) and np.all(cert.u - cert.w > 0.0)


def test_decreasing_le_row():
    # a x <= 4 with a uncertain above its centre: x <= 4 / (2 g_+^{-1}(tau))
    d = {"sense": "max", "c": [1.0, 1.0], "bounds": [[0, 10], [0, 10]],
         "rows": [{"coeffs": [0.0, 1.0], "sense": "<=", "rhs": 4.0,
                   "uncertainty": {"a0": [2.0], "tau": 0.3, "A": [[1.0]]}, "uncertain_idx": [0]}]}
    prob = RobustProblem.from_dict(d)
    a = solve_dual_form(prob)
    b = solve_cutting_plane(prob)
    assert a.objective_value == pytest.approx(b.objective_value, abs=1e-4)
    assert min(a.residuals.values()) >= -1e-6
