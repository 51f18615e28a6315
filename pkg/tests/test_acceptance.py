"""Acceptance criteria 1 to 12.

Each criterion is a function returning ``(passed, detail)``.  The pytest
wrappers time it, record one ``criterion N: PASS|FAIL`` line and assert the
outcome together with the runtime limit.  Running this file as a script
prints the same lines without pytest.
"""

from __future__ import annotations

import math
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from possets.apps.data import synthetic_pv_instance, synthetic_svm_data
from possets.apps.demo import infeasibility_demo
from possets.apps.experiments import DEFAULT_PV_TAUS, pv_guarantee_tau, pv_tau_sweep
from possets.apps.svm import SvmInstance, train_nominal_svm, train_robust_svm
from possets.calibration import coverage_fraction, lognormal_params, lognormal_set, sample_lognormal, tau_guarantee
from possets.core import (
    NormKind,
    UncertaintySet,
    boundary_sample,
    boundary_sample_log,
    contains,
    inverse_variation_lower,
    inverse_variation_upper,
    random_set,
    vector_norm,
)
from possets.duality import linear_objective_conjugate, objective_dual_value, optimal_constraint_certificate, \
    scaled_nominal_certificate
from possets.oracle import MonotoneObjective, verify_boundary, worst_case, worst_case_bounds
from possets.solver import solve_cutting_plane, solve_dual_form
from possets.special import chi2_inv

sys.path.insert(0, str(Path(__file__).parent))
from _instances import NORMS, random_robust_problem  # noqa: E402

# smallest log of a positive normal double
_LOG_TINY = math.log(np.finfo(float).tiny)


# ---------------------------------------------------------------- criterion 1
def criterion_1():
    """Boundary samples are strictly positive for budgets up to 1e3.

    Points are generated in log space: a finite ``ln a`` is a positive
    ``a``.  Where ``a`` is representable in double precision the point
    itself is also checked, together with the boundary equation.
    """
    rng = np.random.default_rng(1)
    n_points = n_float = 0
    worst_boundary = 0.0
    for tau in (1e-3, 1.0, 10.0, 1e3):
        for m in (1, 2, 5):
            for _ in range(1000):
                uset = random_set(rng, m, tau, NORMS[int(rng.integers(3))])
                d = rng.random(m) + 1e-3
                branch = rng.random(m) < 0.5
                log_a = boundary_sample_log(uset, d, branch)
                if not np.all(np.isfinite(log_a)):
                    return False, f"non-finite log point at tau={tau}, m={m}"
                s = log_a - np.log(uset.a0)
                y = np.expm1(s) - s
                gap = abs(vector_norm(uset.A @ y, uset.norm) - tau) / tau
                worst_boundary = max(worst_boundary, gap)
                n_points += 1
                if np.all(log_a > _LOG_TINY):
                    a = boundary_sample(uset, d, branch)
                    n_float += 1
                    if not np.all(a > 0.0):
                        return False, f"nonpositive float point at tau={tau}, m={m}"
    ok = worst_boundary < 1e-8
    return ok, (f"{n_points} points all positive in log space, {n_float} also checked in float64; "
                f"max relative boundary error {worst_boundary:.1e}")


# ---------------------------------------------------------------- criterion 2
def criterion_2():
    """Singleton at zero budget and nestedness in the budget."""
    rng = np.random.default_rng(2)
    nested_hits = 0
    for trial in range(1000):
        m = int(rng.integers(1, 6))
        base = random_set(rng, m, 0.0, NORMS[trial % 3])
        if not contains(base, base.a0).inside:
            return False, "a0 outside its own zero-budget set"
        bumped = base.a0 * (1.0 + rng.choice([-1, 1], m) * rng.uniform(1e-4, 0.1, m))
        if contains(base, bumped).inside:
            return False, "zero-budget set holds a point other than a0"
        if not contains(base, base.a0 * (1.0 + 1e-9)).inside:
            return False, "a0 within round-off rejected by the zero-budget set"
        a = base.a0 * np.exp(0.3 * rng.standard_normal(m))
        budget = contains(base, a).budget
        t1, t2 = np.sort(budget * rng.uniform(0.5, 1.5, 2))
        in1 = contains(base.with_tau(t1), a).inside
        in2 = contains(base.with_tau(t2), a).inside
        if in1 and not in2:
            return False, f"nestedness fails at tau1={t1}, tau2={t2}"
        nested_hits += in1
    return True, f"1000 singleton trials and 1000 nestedness trials ({nested_hits} with the point inside the smaller set)"


# ---------------------------------------------------------------- criterion 3
def criterion_3():
    """Minimal dual residual equals the negated pessimization value."""
    rng = np.random.default_rng(3)
    worst = 0.0
    for k in range(100):
        m = int(rng.integers(1, 4))
        uset = random_set(rng, m, float(rng.uniform(0.05, 2.0)), NORMS[k % 3])
        if k % 2:
            uset = UncertaintySet(uset.a0, uset.tau, uset.A + 0.3 * np.triu(rng.random((m, m)), 1), uset.norm)
        x = rng.uniform(-1.0, 2.0, m)
        b = float(rng.uniform(-2.0, 5.0))
        _, residual = optimal_constraint_certificate(uset, x, b)
        # the dual form certifies a^T x <= b; its pessimization is min_a (b - a^T x)
        obj = MonotoneObjective.linear(b=-b, P=-np.eye(m))
        cert = worst_case(uset, obj, x)
        worst = max(worst, abs(residual + cert.value))
    return worst <= 1e-5, f"100 instances, max |residual + worst value| = {worst:.2e}"


# ---------------------------------------------------------------- criterion 4
def _boundary_grid_min(uset: UncertaintySet, coef: np.ndarray, step: float = 1e-3) -> float:
    """Brute-force ``min c^T a`` over the boundary of a set with ``m <= 2``.

    The variation vector runs over the boundary ``||A y|| = tau`` of the
    nonnegative orthant, parametrized by its angle on a ``step`` grid; every
    branch combination is tried for every grid point.
    """
    m = uset.m
    if m == 1:
        ys = np.array([[uset.tau / abs(uset.A[0, 0])]])
    else:
        theta = np.arange(0.0, math.pi / 2 + step, step)
        theta[-1] = min(theta[-1], math.pi / 2)
        d = np.column_stack([np.cos(theta), np.sin(theta)])
        scale = np.array([vector_norm(uset.A @ di, uset.norm) for di in d])
        ys = uset.tau * d / scale[:, None]
    lo = inverse_variation_lower(ys.ravel()).reshape(ys.shape)
    hi = inverse_variation_upper(ys.ravel()).reshape(ys.shape)
    best = math.inf
    for mask in range(2**m):
        pick = np.array([(mask >> i) & 1 for i in range(m)], dtype=bool)
        z = np.where(pick, lo, hi)
        best = min(best, float(np.min((z * uset.a0) @ coef)))
    return best


def criterion_4():
    """Oracle against a boundary grid, and the boundary condition."""
    rng = np.random.default_rng(4)
    worst_gap = 0.0
    worst_budget = 0.0
    for k in range(50):
        m = 1 + k % 2
        uset = random_set(rng, m, float(rng.uniform(0.05, 2.0)), NORMS[k % 3])
        x = rng.choice([-1.0, 1.0], m) * rng.uniform(0.1, 1.0, m)
        obj = MonotoneObjective.linear()
        cert = worst_case(uset, obj, x)
        grid = _boundary_grid_min(uset, x)
        if cert.value > grid + 1e-9:
            return False, f"instance {k}: oracle {cert.value} above a feasible grid point {grid}"
        worst_gap = max(worst_gap, grid - cert.value)
        if not verify_boundary(cert, uset, tol=1e-6):
            return False, f"instance {k}: boundary condition fails (residual {cert.budget_residual:.2e})"
        worst_budget = max(worst_budget, abs(cert.budget_residual))
    ok = worst_gap <= 1e-3 and worst_budget <= 1e-6
    return ok, f"50 instances, max grid gap {worst_gap:.2e}, max | ||Ay*|| - tau | {worst_budget:.2e}"


# ---------------------------------------------------------------- criterion 5
def criterion_5():
    """Worst cases stay inside the analytic bounds and decay at large budgets."""
    rng = np.random.default_rng(5)
    runs = 0
    worst_slack = math.inf
    for k in range(120):
        m = int(rng.integers(1, 4))
        tau = float(10.0 ** rng.uniform(-3, 3))
        uset = random_set(rng, m, tau, NORMS[k % 3])
        sign = 1.0 if k % 2 == 0 else -1.0
        mono = "increasing" if sign > 0 else "decreasing"
        x = sign * rng.uniform(0.1, 2.0, m)
        cert = worst_case(uset, MonotoneObjective.linear(monotonicity=mono), x)
        box = worst_case_bounds(uset, mono)
        slack = min(np.min(cert.a_star - box[:, 0]), np.min(box[:, 1] - cert.a_star)) / np.max(uset.a0)
        worst_slack = min(worst_slack, float(slack))
        runs += 1
    if worst_slack < -1e-8:
        return False, f"bound violated by {-worst_slack:.2e} (relative)"
    worst_ratio = 0.0
    for k in range(30):
        m = int(rng.integers(1, 4))
        uset = random_set(rng, m, 1e3, NORMS[k % 3])
        x = rng.uniform(0.1, 2.0, m)
        cert = worst_case(uset, MonotoneObjective.linear(monotonicity="increasing"), x)
        worst_ratio = max(worst_ratio, float(np.max(cert.a_star / uset.a0)))
    ok = worst_ratio <= 1e-6
    return ok, (f"{runs} oracle runs inside the bounds (min relative slack {worst_slack:.1e}); "
                f"max a*/a0 at tau=1e3 is {worst_ratio:.1e}")


# ---------------------------------------------------------------- criterion 6
def criterion_6():
    """Closed-form objective bound ``10 ln 2 - tau``."""
    worst = 0.0
    for tau in (0.0, 0.5, 1.0):
        uset = UncertaintySet([1.0, 1.0], tau, 5.0 * math.sqrt(2.0) * np.eye(2), NormKind.L2)
        cert = scaled_nominal_certificate(uset, [5.0, 5.0], 1.0)
        val = objective_dual_value([5.0, 5.0], cert, uset, linear_objective_conjugate())
        worst = max(worst, abs(val - (10.0 * math.log(2.0) - tau)))
    return worst <= 1e-12, f"max error {worst:.1e} over tau in {{0, 0.5, 1}}"


# ---------------------------------------------------------------- criterion 7
def criterion_7():
    """Chi-squared quantiles against closed forms."""
    ps = np.round(np.arange(0.01, 1.0, 0.01), 2)
    err2 = max(abs(chi2_inv(2, p) + 2.0 * math.log1p(-p)) for p in ps)
    q1 = chi2_inv(1, 0.95)
    ok = err2 <= 1e-9 and abs(q1 - 3.841459) <= 1e-5
    return ok, f"dof 2 max error {err2:.1e} over 99 levels; dof 1 at 0.95 gives {q1:.6f}"


# ---------------------------------------------------------------- criterion 8
def _spec_with_lambda(rng: np.random.Generator, m: int, lam: float):
    s2ln = lam * rng.uniform(0.3, 1.0, m)
    s2ln[int(rng.integers(m))] = lam
    mu = rng.uniform(0.5, 5.0, m)
    return lognormal_params(mu, mu**2 * np.expm1(s2ln))


def criterion_8():
    """Monte Carlo coverage of the guaranteed budget."""
    rng = np.random.default_rng(8)
    parts = []
    ok = True
    for eps, m, lam in ((0.05, 2, 0.01), (0.1, 5, 0.05), (0.2, 1, 0.1)):
        spec = _spec_with_lambda(rng, m, lam)
        tau = tau_guarantee(eps, m, spec.lam)
        cov = coverage_fraction(lognormal_set(spec, tau), sample_lognormal(spec, 10_000, rng))
        ok = ok and cov >= 1.0 - eps
        parts.append(f"eps={eps}: {cov:.4f} >= {1 - eps:.2f}")
    return ok, "; ".join(parts)


# ---------------------------------------------------------------- criterion 9
def criterion_9():
    """Dual form against cutting planes, and monotone optima in the budget."""
    rng = np.random.default_rng(9)
    worst = 0.0
    feasible = skipped = k = 0
    while feasible < 50:
        prob = random_robust_problem(rng, k)
        a = solve_dual_form(prob)
        b = solve_cutting_plane(prob)
        k += 1
        if a.status == b.status == "infeasible":
            skipped += 1
            continue
        if a.status != "optimal" or b.status != "optimal":
            return False, f"instance {k - 1}: statuses {a.status}/{b.status}"
        worst = max(worst, abs(a.objective_value - b.objective_value))
        feasible += 1
    base = random_robust_problem(np.random.default_rng(90), 0)
    taus = np.linspace(0.0, 3.0, 20)
    values = []
    for tau in taus:
        res = solve_dual_form(base.with_tau(float(tau)))
        if res.status != "optimal":
            return False, f"sweep point tau={tau:.3f}: {res.status}"
        values.append(res.objective_value)
    drops = float(np.min(np.diff(values)))
    ok = worst <= 1e-4 and drops >= -1e-7
    return ok, (f"50 feasible instances ({skipped} infeasible draws skipped, both solvers agreed), "
                f"max objective gap {worst:.1e}; 20-point sweep min step {drops:.1e}")


# --------------------------------------------------------------- criterion 10
def criterion_10():
    """Ellipsoid makes the covering row infeasible; the variation set does not."""
    demo = infeasibility_demo()
    ok = demo.ellipsoid_infeasible and demo.omega_feasible and demo.omega[-1]["tau"] >= 1e3
    return ok, (f"ellipsoid radius {demo.delta:.3f} > {demo.threshold:.3f}: {demo.ellipsoid_status}; "
                f"variation set optimal for all {len(demo.omega)} budgets up to {demo.omega[-1]['tau']:g}")


# --------------------------------------------------------------- criterion 11
def criterion_11():
    """Robust PV plans violate less on held-out irradiance draws."""
    inst = synthetic_pv_instance()
    taus = list(DEFAULT_PV_TAUS)
    tau_g = pv_guarantee_tau(inst, 0.1)
    sweep = pv_tau_sweep(inst, taus + [tau_g], n_draws=100, seed=2024)
    viol = np.array([s.mean_max_violation for s in sweep.robust])
    if not all(s.status == "optimal" for s in sweep.robust):
        return False, "a robust plan did not solve"
    nom = sweep.nominal.mean_max_violation
    mono = float(np.min(-np.diff(viol[:-1])))
    ok = mono >= -1e-9 and np.all(viol <= nom + 1e-9)
    return ok, (f"nominal {nom:.2f}%, sweep {viol[0]:.2f}% -> {viol[-2]:.2f}% (min decrease {mono:.1e}), "
                f"tau_g={tau_g:.3f}: {viol[-1]:.2f}%")


# --------------------------------------------------------------- criterion 12
def criterion_12():
    """Robust SVM objective grows with the budget; zero budget is the LP."""
    X, y = synthetic_svm_data(60, 2, seed=12)
    taus = np.linspace(0.0, 0.05, 10)
    objs = []
    for tau in taus:
        model = train_robust_svm(SvmInstance(X, y, float(tau)))
        if model.status != "optimal":
            return False, f"tau={tau}: {model.status}"
        objs.append(model.objective)
    lp = train_nominal_svm(X, y, None)
    step = float(np.min(np.diff(objs)))
    gap = abs(objs[0] - lp.objective)
    ok = step >= -1e-7 and gap <= 1e-5
    return ok, f"objective {objs[0]:.4f} -> {objs[-1]:.4f} (min step {step:.1e}); |tau=0 - LP| = {gap:.1e}"


# ------------------------------------------------------------------ harness
LIMITS = {1: 5.0, 2: 1.0, 3: 30.0, 4: 60.0, 5: 10.0, 6: None, 7: None, 8: 20.0, 9: None,
          10: None, 11: 120.0, 12: 60.0}
CRITERIA = {n: globals()[f"criterion_{n}"] for n in LIMITS}


def run_criterion(n: int) -> tuple[bool, str]:
    start = time.perf_counter()
    ok, detail = CRITERIA[n]()
    elapsed = time.perf_counter() - start
    limit = LIMITS[n]
    in_time = limit is None or elapsed < limit
    budget = "" if limit is None else f" < {limit:g} s"
    passed = ok and in_time
    line = f"criterion {n}: {'PASS' if passed else 'FAIL'} ({detail}; {elapsed:.2f} s{budget})"
    return passed, line


@pytest.mark.parametrize("n", sorted(LIMITS))
def test_criterion(n, acceptance_log):
    passed, line = run_criterion(n)
    acceptance_log(line)
    assert passed, line


if __name__ == "__main__":
    results = [run_criterion(n) for n in sorted(LIMITS)]
    for _, line in results:
        print(line)
    sys.exit(0 if all(ok for ok, _ in results) else 1)
