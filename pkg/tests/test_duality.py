"""Support functions, certificates and the dual-form constraint."""

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from possets.core import UncertaintySet, inverse_variation_lower, inverse_variation_upper, random_set, variation
from possets.duality import (
    DualCertificate,
    ShiftedSupportProblem,
    dual_constraint_residual,
    linear_constraint_conjugate,
    linear_dual_constraint,
    linear_objective_conjugate,
    objective_dual_value,
    optimal_constraint_certificate,
    optimal_objective_certificate,
    scaled_nominal_certificate,
    solve_support_split,
    support_Z,
    support_Z1,
    support_Z2,
    support_Z3,
)
from possets.oracle import MonotoneObjective, worst_case

LN2 = math.log(2.0)


# ------------------------------------------------------------ Z1, Z2, Z3
@pytest.mark.parametrize("y, expected", [((-1.0, 0.5), LN2 - 0.5), ((-1.0, 0.0), 0.0), ((1.0, 0.0), math.inf)])
def test_support_Z1_examples(y, expected):
    assert support_Z1(np.array(y), 0.0) == pytest.approx(expected, abs=1e-12)


def test_support_Z1_eps_term_and_domain():
    # eps u is added; u - w <= 0 is outside the domain
    assert support_Z1([-2.0, 0.0], 0.1) == pytest.approx(0.2)
    assert support_Z1([-1.0, 1.0], 0.0) == math.inf


def test_support_Z1_rejects_odd_length():
    with pytest.raises(ValueError):
        support_Z1([1.0, 2.0, 3.0], 0.0)


@pytest.mark.parametrize("y, A, tau, expected", [
    ((0.0, 0.0), [[1.0]], 1.0, 0.0),
    ((4.0, 0.0), [[2.0]], 1.0, 2.0),
    ((0.0, 1.0), [[3.0]], 1.0, math.inf),
])
def test_support_Z2_examples(y, A, tau, expected):
    assert support_Z2(np.array(y), A, tau, 0.0) == pytest.approx(expected)


def test_support_Z2_singular_A():
    with pytest.raises(ValueError):
        support_Z2([1.0, 1.0, 0.0, 0.0], np.zeros((2, 2)), 1.0, 0.0)


@pytest.mark.parametrize("y, expected", [((0.0, 0.0), 0.0), ((0.0, 2.0), 1.0), ((1.0, 0.0), math.inf)])
def test_support_Z3_examples(y, expected):
    assert support_Z3(np.array(y), [[1.0]], 0.5) == pytest.approx(expected)


def test_support_Z3_singular_V():
    with pytest.raises(ValueError):
        support_Z3([0.0, 0.0, 1.0, 1.0], np.zeros((2, 2)), 1.0)


# ------------------------------------------------------------ combined support function
def test_shifted_problem_validation():
    with pytest.raises(ValueError):
        ShiftedSupportProblem(np.eye(1), 0.0)
    with pytest.raises(ValueError):
        ShiftedSupportProblem(np.eye(1), 1.0, eps=2.0)
    with pytest.raises(ValueError):
        ShiftedSupportProblem(np.eye(1), 1.0, V=np.eye(1))
    p = ShiftedSupportProblem(np.eye(2), 1.0)
    assert p.eps == pytest.approx(1e-9)
    assert ShiftedSupportProblem(np.eye(2), 1e-10).eps == pytest.approx(1e-10 / (2.0 * math.sqrt(2.0)))


def test_support_Z_zero():
    assert support_Z(np.zeros(4), ShiftedSupportProblem(np.eye(2), 1.0)) == 0.0


def _grid_support_m1(y1: float, y2: float, A: float, tau: float, eps: float, n: int = 2001) -> float:
    """Dense 2-D grid over ``{(eta, z): g(z) <= eta + eps, |A (eta + eps)| <= tau}``."""
    ymax = tau / abs(A)
    # z range by plain bisection
    lo = 1e-12
    hi = 1.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if variation(mid) > ymax else (lo, mid)
    zlo = hi
    lo, hi = 1.0, 10.0 + 2.0 * ymax
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        lo, hi = (lo, mid) if variation(mid) > ymax else (mid, hi)
    zhi = lo
    ys = np.linspace(0.0, ymax, n)[:, None]
    zs = np.linspace(zlo, zhi, n)[None, :]
    feas = variation(zs) <= ys
    vals = y1 * (ys - eps) + y2 * (zs - 1.0)
    return float(np.max(np.where(feas, vals, -np.inf)))


@pytest.mark.parametrize("y1, y2", [(-1.0, 0.5), (-2.0, -0.7), (-0.5, 1.0), (0.3, 0.4), (0.0, -1.0)])
def test_support_Z_matches_grid_m1(y1, y2):
    prob = ShiftedSupportProblem(np.eye(1), 0.5)
    val = support_Z(np.array([y1, y2]), prob)
    grid = _grid_support_m1(y1, y2, 1.0, 0.5, prob.eps)
    # weak duality: the grid never exceeds the support function
    assert grid <= val + 1e-9
    assert val - grid <= 1e-3


def test_support_Z_reduces_to_Z2_split():
    prob = ShiftedSupportProblem(np.eye(2), 0.7)
    y = np.array([0.4, 1.3, 0.0, 0.0])
    assert support_Z(y, prob) == pytest.approx(support_Z2(y, np.eye(2), 0.7, prob.eps), abs=1e-7)


def test_support_Z_with_ellipsoidal_component():
    # with a huge radius the ellipsoid does not bind and Z3 costs nothing
    loose = ShiftedSupportProblem(np.eye(1), 0.5, V=np.eye(1), delta=1e6)
    plain = ShiftedSupportProblem(np.eye(1), 0.5)
    y = np.array([-1.0, 0.5])
    assert support_Z(y, loose) == pytest.approx(support_Z(y, plain), abs=1e-6)
    # a small radius caps the xi direction: z - 1 <= delta
    tight = ShiftedSupportProblem(np.eye(1), 0.5, V=np.eye(1), delta=0.1)
    assert support_Z(y, tight) <= support_Z(y, plain) + 1e-9
    assert support_Z(y, tight) == pytest.approx(0.5 * 0.1 - 1.0 * (variation(1.1) - tight.eps), abs=1e-6)


@given(st.floats(1e-10, 0.25))
def test_eps_independence(eps):
    A = np.array([[1.0, 0.2], [0.0, 1.5]])
    tau = 1.0
    y = np.array([-0.8, 0.2, 0.6, -0.4])
    ref = ShiftedSupportProblem(A, tau, eps=1e-9)
    prob = ShiftedSupportProblem(A, tau, eps=min(eps, tau / (2 * np.linalg.norm(A @ np.ones(2))) * 0.999))
    # the eps terms cancel in the dual constraint: value + eps sum(y1) is invariant
    a = support_Z(y, prob) + prob.eps * y[:2].sum()
    b = support_Z(y, ref) + ref.eps * y[:2].sum()
    assert a == pytest.approx(b, abs=1e-8)


def test_split_program_reports_status():
    split = solve_support_split(np.array([-1.0, 0.5]), ShiftedSupportProblem(np.eye(1), 0.5))
    assert split.status == "optimal" and split.u[0] > 0 and split.u[0] - split.w[0] > 0


# ------------------------------------------------------------ certificates
def _set_m1(tau=0.5):
    return UncertaintySet([2.0], tau, [[1.0]])


def test_certificate_domain_errors():
    with pytest.raises(ValueError):
        DualCertificate(v=[0.0], u=[0.0], w=[0.0], s1=[0.0])
    with pytest.raises(ValueError):
        DualCertificate(v=[0.0], u=[1.0], w=[1.0], s1=[1.0])


def test_certificate_linear_equation_check():
    cert = DualCertificate(v=[0.0], u=[1.0], w=[0.0], s1=[2.0])
    with pytest.raises(ValueError):
        dual_constraint_residual(cert, [0.0], _set_m1(), linear_constraint_conjugate(1.0))


def test_residual_vanishing_uncertainty_terms():
    uset = UncertaintySet([1.0, 3.0], 0.4, [[2.0, 0.0], [0.5, 1.0]])
    u = np.array([1.0, 2.0])
    cert = DualCertificate(v=[0.0, 0.0], u=u, w=[0.0, 0.0], s1=np.linalg.solve(uset.A.T, u))
    # v = 0 kills every term except tau ||s1||_* - f_*
    expected = uset.tau * np.linalg.norm(cert.s1) - 1.0
    assert dual_constraint_residual(cert, [0.0, 0.0], uset, linear_constraint_conjugate(1.0)) == pytest.approx(expected)


def test_residual_example_x0_b1():
    uset = UncertaintySet([1.0], 0.0, [[1.0]])
    cert = DualCertificate(v=[0.0], u=[1.0], w=[0.0], s1=[1.0])
    assert dual_constraint_residual(cert, [0.0], uset, linear_constraint_conjugate(1.0)) == pytest.approx(-1.0)


def test_residual_outside_conjugate_domain_is_infinite():
    cert = DualCertificate(v=[1.0], u=[3.0], w=[2.0], s1=[3.0])
    assert dual_constraint_residual(cert, [0.5], _set_m1(), linear_constraint_conjugate(1.0)) == math.inf


@given(st.integers(0, 10_000))
def test_residual_at_zero_budget_is_nominal(seed):
    rng = np.random.default_rng(seed)
    uset = random_set(rng, int(rng.integers(1, 4)), 0.0)
    x = rng.uniform(-1.0, 2.0, uset.m)
    b = float(rng.uniform(-1.0, 3.0))
    cert, res = optimal_constraint_certificate(uset, x, b)
    assert res == pytest.approx(uset.a0 @ x - b, abs=1e-6)
    r1, r2 = cert.linear_residuals(uset)
    assert r1 <= 1e-8 * np.max(cert.u) and r2 <= 1e-12


def test_constraint_certificate_m1_instance():
    # the certificate bounds max_a a x - b, attained on the upper branch
    cert, res = optimal_constraint_certificate(_set_m1(), [1.0], 5.0)
    assert res == pytest.approx(2.0 * inverse_variation_upper(0.5) - 5.0, abs=1e-7)
    assert res == pytest.approx(-0.2846, abs=1e-4)
    direct = linear_dual_constraint([1.0], cert.u, cert.s1, _set_m1(), 5.0)
    assert direct == pytest.approx(res, abs=1e-12)


def test_objective_certificate_m1_instance():
    # the lower-bound side: min_a a x - b with the lower branch
    cert, val = optimal_objective_certificate(_set_m1(), [1.0])
    assert val - 5.0 == pytest.approx(2.0 * inverse_variation_lower(0.5) - 5.0, abs=1e-7)
    assert val - 5.0 == pytest.approx(-4.3965, abs=1e-4)


def test_linear_dual_constraint_examples():
    uset = UncertaintySet([2.0, 1.0], 0.3, np.eye(2))
    s1 = np.array([1.0, 2.0])
    assert linear_dual_constraint([0.0, 0.0], s1, s1, uset, 1.5) == pytest.approx(0.3 * math.sqrt(5.0) - 1.5)
    # tau = 0 and u -> infinity: value -> a0^T x - b
    u = np.full(2, 1e6)
    flat = uset.with_tau(0.0)
    x = np.array([0.7, 1.1])
    assert linear_dual_constraint(x, u, u, flat, 1.0) == pytest.approx(uset.a0 @ x - 1.0, abs=1e-5)


def test_linear_dual_constraint_domain_errors():
    uset = _set_m1()
    with pytest.raises(ValueError):
        linear_dual_constraint([1.0], [0.0], [0.0], uset, 1.0)
    with pytest.raises(ValueError):
        linear_dual_constraint([1.0], [1.5], [1.5], uset, 1.0)
    with pytest.raises(ValueError):
        linear_dual_constraint([1.0], [3.0], [1.0], uset, 1.0)


@given(st.integers(0, 10_000))
def test_certificate_equivalence_with_pessimization(seed):
    rng = np.random.default_rng(seed)
    m = int(rng.integers(1, 4))
    uset = random_set(rng, m, float(rng.uniform(0.05, 2.0)), ("l1", "l2", "linf")[seed % 3])
    x = rng.uniform(-1.0, 2.0, m)
    b = float(rng.uniform(-1.0, 4.0))
    _, res = optimal_constraint_certificate(uset, x, b)
    worst = worst_case(uset, MonotoneObjective.linear(b=-b, P=-np.eye(m)), x)
    assert res == pytest.approx(-worst.value, abs=1e-5)


@given(st.integers(0, 10_000), st.floats(0.0, 1.0))
def test_residual_is_jointly_convex(seed, theta):
    rng = np.random.default_rng(seed)
    m = int(rng.integers(1, 4))
    uset = random_set(rng, m, float(rng.uniform(0.1, 2.0)))

    def point():
        x = rng.uniform(-1.0, 1.0, m)
        w = uset.a0 * x
        u = np.maximum(w, 0.0) + rng.uniform(0.1, 3.0, m)
        return x, DualCertificate(v=x, u=u, w=w, s1=np.linalg.solve(uset.A.T, u))

    (x1, c1), (x2, c2) = point(), point()
    conj = linear_constraint_conjugate(0.7)
    f1 = dual_constraint_residual(c1, x1, uset, conj)
    f2 = dual_constraint_residual(c2, x2, uset, conj)
    mix = lambda p, q: theta * p + (1.0 - theta) * q  # noqa: E731
    cm = DualCertificate(v=mix(c1.v, c2.v), u=mix(c1.u, c2.u), w=mix(c1.w, c2.w), s1=mix(c1.s1, c2.s1))
    fm = dual_constraint_residual(cm, mix(x1, x2), uset, conj)
    assert fm <= theta * f1 + (1.0 - theta) * f2 + 1e-9 * (1.0 + abs(f1) + abs(f2))


# ------------------------------------------------------------ objective bound
def test_objective_dual_value_at_zero_decision():
    uset = UncertaintySet([1.0, 2.0], 0.5, np.eye(2))
    u = np.array([1.0, 1.0])
    cert = DualCertificate(v=[0.0, 0.0], u=u, w=[0.0, 0.0], s1=u)
    # the bound is -tau ||s1||, which tends to 0 as the certificate shrinks
    assert objective_dual_value([0.0, 0.0], cert, uset, linear_objective_conjugate()) <= 0.0
    _, val = optimal_objective_certificate(uset, [0.0, 0.0])
    assert val == pytest.approx(0.0, abs=1e-9)


@pytest.mark.parametrize("tau", [0.0, 0.5, 1.0])
def test_closed_form_bound(tau):
    uset = UncertaintySet([1.0, 1.0], tau, 5.0 * math.sqrt(2.0) * np.eye(2))
    cert = scaled_nominal_certificate(uset, [5.0, 5.0], 1.0)
    val = objective_dual_value([5.0, 5.0], cert, uset, linear_objective_conjugate())
    assert val == pytest.approx(10.0 * LN2 - tau, abs=1e-12)


def test_closed_form_bound_value_at_tau_one():
    uset = UncertaintySet([1.0, 1.0], 1.0, 5.0 * math.sqrt(2.0) * np.eye(2))
    cert = scaled_nominal_certificate(uset, [5.0, 5.0], 1.0)
    assert objective_dual_value([5.0, 5.0], cert, uset, linear_objective_conjugate()) == pytest.approx(5.9315, abs=1e-4)


def test_scaled_certificate_rejects_ellipsoid():
    uset = UncertaintySet([1.0], 1.0, [[1.0]], V=[[1.0]], delta=0.1)
    with pytest.raises(ValueError):
        scaled_nominal_certificate(uset, [1.0], 1.0)


@given(st.integers(0, 10_000))
def test_objective_bound_below_oracle_and_tight(seed):
    rng = np.random.default_rng(seed)
    m = int(rng.integers(1, 4))
    uset = random_set(rng, m, float(rng.uniform(0.05, 2.0)))
    x = rng.uniform(0.1, 2.0, m)
    worst = worst_case(uset, MonotoneObjective.linear(monotonicity="increasing"), x).value
    # any valid certificate is a lower bound
    cert = scaled_nominal_certificate(uset, x, float(rng.uniform(0.2, 3.0)))
    assert objective_dual_value(x, cert, uset, linear_objective_conjugate()) <= worst + 1e-9
    _, best = optimal_objective_certificate(uset, x)
    assert best == pytest.approx(worst, abs=1e-6)


def test_constraint_certificate_at_zero_decision():
    uset = UncertaintySet([1.0, 2.0], 0.5, np.eye(2))
    _, res = optimal_constraint_certificate(uset, [0.0, 0.0], 1.0)
    assert res == pytest.approx(-1.0, abs=1e-9)
