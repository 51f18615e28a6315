"""Variation function, its inverses, sets, membership and boundary samples."""

import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from possets.core import (
    EllipsoidalSet,
    NormKind,
    UncertaintySet,
    boundary_sample,
    boundary_sample_log,
    contains,
    inverse_variation_lower,
    inverse_variation_upper,
    log_inverse_variation_lower,
    operator_norm,
    random_set,
    variation,
    vector_norm,
)


def _bisect(y, lo, hi):
    """Plain bisection on g(t) = y, the independent reference."""
    glo = variation(lo) - y
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        gm = variation(mid) - y
        if (gm > 0) == (glo > 0):
            lo, glo = mid, gm
        else:
            hi = mid
    return 0.5 * (lo + hi)


# ------------------------------------------------------------ variation
@pytest.mark.parametrize("t, expected", [(1.0, 0.0), (0.5, 0.1931472), (2.0, 0.3068528)])
def test_variation_examples(t, expected):
    assert variation(t) == pytest.approx(expected, abs=1e-7)


def test_variation_closed_forms_are_exact():
    assert variation(0.5) == pytest.approx(0.5 + math.log(2.0) - 1.0, abs=1e-15)
    assert variation(2.0) == pytest.approx(1.0 - math.log(2.0), abs=1e-15)


@pytest.mark.parametrize("t", [0.0, -1.0])
def test_variation_rejects_nonpositive(t):
    with pytest.raises(ValueError):
        variation(t)


def test_variation_precise_near_one():
    d = 1e-8
    # g(1 + d) = d^2 / 2 - d^3 / 3 + ...
    assert variation(1.0 + d) == pytest.approx(d * d / 2.0, rel=1e-6)


def test_variation_vectorized_shape():
    out = variation(np.array([[0.5, 1.0], [2.0, 3.0]]))
    assert out.shape == (2, 2)
    assert out[0, 1] == 0.0


@given(st.floats(1e-6, 1e6))
def test_variation_nonnegative_and_zero_only_at_one(t):
    g = variation(t)
    assert g >= 0.0
    if abs(t - 1.0) > 1e-6:
        assert g > 0.0


@given(st.floats(1e-4, 0.999), st.floats(1e-4, 0.999))
def test_variation_decreasing_below_one(s, t):
    if s < t:
        assert variation(s) >= variation(t)


@given(st.floats(1.001, 1e4), st.floats(1.001, 1e4))
def test_variation_increasing_above_one(s, t):
    if s < t:
        assert variation(s) <= variation(t)


# ------------------------------------------------------------ inverses
@pytest.mark.parametrize("y, expected, tol", [(0.0, 1.0, 0.0), (0.5, 0.3017, 1e-3), (0.1931472, 0.5, 1e-6)])
def test_inverse_lower_examples(y, expected, tol):
    assert inverse_variation_lower(y) == pytest.approx(expected, abs=tol)


@pytest.mark.parametrize("y, expected, tol", [(0.0, 1.0, 0.0), (0.5, 2.3577, 1e-3), (0.3068528, 2.0, 1e-6)])
def test_inverse_upper_examples(y, expected, tol):
    assert inverse_variation_upper(y) == pytest.approx(expected, abs=tol)


def test_inverses_match_bisection_reference():
    assert inverse_variation_lower(0.5) == pytest.approx(_bisect(0.5, 1e-12, 1.0), abs=1e-10)
    assert inverse_variation_upper(0.5) == pytest.approx(_bisect(0.5, 1.0, 10.0), abs=1e-10)


@pytest.mark.parametrize("fn", [inverse_variation_lower, inverse_variation_upper])
def test_inverse_rejects_negative(fn):
    with pytest.raises(ValueError):
        fn(-0.1)


@given(st.floats(0.0, 50.0))
def test_branch_consistency(y):
    tol = 1e-12
    lo = inverse_variation_lower(y, tol)
    hi = inverse_variation_upper(y, tol)
    assert 0.0 < lo <= 1.0 <= hi
    assert variation(lo) == pytest.approx(y, abs=10 * tol * max(1.0, y))
    assert variation(hi) == pytest.approx(y, abs=10 * tol * max(1.0, y))


@given(st.floats(0.0, 5000.0))
def test_log_lower_branch_matches_linear_branch(y):
    s = log_inverse_variation_lower(y)
    assert math.isfinite(s) and s <= 0.0
    # g(e^s) = e^s - s - 1 = y holds in log form even when e^s underflows
    assert math.expm1(s) - s == pytest.approx(y, rel=1e-12, abs=1e-12)
    if y < 500:
        assert math.exp(s) == pytest.approx(inverse_variation_lower(y), rel=1e-9)


def test_inverses_vectorized():
    ys = np.array([0.0, 0.5, 3.0])
    lo = inverse_variation_lower(ys)
    assert lo.shape == (3,)
    np.testing.assert_allclose(variation(lo), ys, atol=1e-11)


# ------------------------------------------------------------ norms
def test_norm_duals():
    assert NormKind.L1.dual() is NormKind.LINF
    assert NormKind.L2.dual() is NormKind.L2
    assert NormKind.LINF.dual() is NormKind.L1


@pytest.mark.parametrize("text, kind", [("l1", NormKind.L1), ("L2", NormKind.L2), ("linf", NormKind.LINF)])
def test_norm_parse(text, kind):
    assert NormKind.parse(text) is kind


def test_norm_parse_rejects_unknown():
    with pytest.raises(ValueError):
        NormKind.parse("l3")


def test_vector_and_operator_norms():
    v = np.array([3.0, -4.0])
    assert vector_norm(v, "l1") == 7.0
    assert vector_norm(v, "l2") == 5.0
    assert vector_norm(v, "linf") == 4.0
    M = np.array([[1.0, -2.0], [3.0, 4.0]])
    assert operator_norm(M, "l1") == pytest.approx(6.0)
    assert operator_norm(M, "linf") == pytest.approx(7.0)
    assert operator_norm(M, "l2") == pytest.approx(np.linalg.norm(M, 2), rel=1e-9)


# ------------------------------------------------------------ sets
def _set(tau=0.1):
    return UncertaintySet([1.0, 2.0], tau, np.eye(2), NormKind.L2)


@pytest.mark.parametrize("kwargs", [
    {"a0": [1.0, 0.0], "tau": 0.1, "A": np.eye(2)},
    {"a0": [1.0, -1.0], "tau": 0.1, "A": np.eye(2)},
    {"a0": [1.0, 1.0], "tau": -0.1, "A": np.eye(2)},
    {"a0": [1.0, 1.0], "tau": 0.1, "A": np.eye(3)},
    {"a0": [1.0, 1.0], "tau": 0.1, "A": np.eye(2), "V": np.eye(2)},
    {"a0": [1.0, 1.0], "tau": 0.1, "A": np.eye(2), "V": np.eye(2), "delta": -1.0},
])
def test_set_construction_errors(kwargs):
    with pytest.raises(ValueError):
        UncertaintySet(**kwargs)


def test_set_is_immutable():
    s = _set()
    with pytest.raises(ValueError):
        s.a0[0] = 5.0


def test_set_json_round_trip():
    s = UncertaintySet([1.0, 2.0], 0.3, [[1.0, 0.2], [0.0, 2.0]], "linf", V=np.eye(2), delta=0.5)
    back = UncertaintySet.from_json(s.to_json())
    np.testing.assert_array_equal(back.a0, s.a0)
    np.testing.assert_array_equal(back.A, s.A)
    np.testing.assert_array_equal(back.V, s.V)
    assert (back.tau, back.delta, back.norm) == (s.tau, s.delta, s.norm)
    d = json.loads(s.to_json())
    assert d["norm"] == "linf" and d["A"] == [[1.0, 0.2], [0.0, 2.0]]


def test_set_from_dict_defaults_to_l2():
    s = UncertaintySet.from_dict({"a0": [1.0], "tau": 0.2, "A": [[1.0]]})
    assert s.norm is NormKind.L2 and s.V is None


# ------------------------------------------------------------ membership
def test_contains_nominal_point():
    d = contains(_set(), [1.0, 2.0])
    assert d.inside and d.budget == 0.0


def test_contains_derived_example():
    d = contains(_set(), [1.05, 1.9])
    expected = math.hypot(variation(1.05), variation(0.95))
    assert d.inside
    assert d.budget == pytest.approx(expected, rel=1e-12)
    assert d.budget == pytest.approx(0.00177, abs=1e-5)
    np.testing.assert_allclose(d.y, [variation(1.05), variation(0.95)])


def test_contains_nonpositive_coordinate():
    d = contains(_set(), [-1.0, 2.0])
    assert not d.inside and d.budget == math.inf
    assert not contains(_set(), [0.0, 2.0]).inside


def test_contains_dimension_mismatch():
    with pytest.raises(ValueError):
        contains(_set(), [1.0, 2.0, 3.0])


def test_contains_outside_point():
    assert not contains(_set(0.1), [3.0, 2.0]).inside


def test_contains_ellipsoidal_component():
    s = UncertaintySet([1.0, 1.0], 10.0, np.eye(2), "l2", V=np.eye(2), delta=0.1)
    assert contains(s, [1.05, 1.05]).inside
    d = contains(s, [1.5, 1.0])
    assert not d.inside and d.ellipsoid_budget == pytest.approx(0.5)


@given(st.integers(0, 10_000))
def test_singleton_at_zero_budget(seed):
    rng = np.random.default_rng(seed)
    s = random_set(rng, int(rng.integers(1, 5)), 0.0)
    assert contains(s, s.a0).inside
    # the budget tolerance 1e-12 admits |z - 1| up to about sqrt(2e-12 / ||A||)
    a = s.a0 * (1.0 + rng.choice([-1.0, 1.0], s.m) * rng.uniform(1e-4, 0.5, s.m))
    assert not contains(s, a).inside
    assert contains(s, s.a0 * (1.0 + 1e-9)).inside


@given(st.integers(0, 10_000), st.floats(0.0, 3.0), st.floats(0.0, 3.0))
def test_nestedness(seed, t1, t2):
    t1, t2 = sorted((t1, t2))
    rng = np.random.default_rng(seed)
    s = random_set(rng, int(rng.integers(1, 5)), t1)
    a = s.a0 * np.exp(0.5 * rng.standard_normal(s.m))
    if contains(s, a).inside:
        assert contains(s.with_tau(t2), a).inside


@given(st.integers(0, 10_000), st.floats(0.0, 1.0))
def test_convexity_witness(seed, theta):
    rng = np.random.default_rng(seed)
    s = random_set(rng, int(rng.integers(1, 4)), float(rng.uniform(0.1, 2.0)), ("l1", "l2", "linf")[seed % 3])
    pts = [boundary_sample(s, rng.random(s.m) + 0.01, rng.random(s.m) < 0.5) for _ in range(2)]
    mid = theta * pts[0] + (1.0 - theta) * pts[1]
    assert contains(s, mid, atol=1e-9).inside


# ------------------------------------------------------------ boundary samples
def test_boundary_sample_zero_budget_returns_a0():
    s = UncertaintySet([2.0, 3.0], 0.0, np.eye(2))
    np.testing.assert_array_equal(boundary_sample(s, [1.0, 1.0]), s.a0)
    np.testing.assert_allclose(boundary_sample_log(s, [1.0, 1.0]), np.log(s.a0))


@pytest.mark.parametrize("branch, expected", [("lower", 0.6035), ("upper", 4.7154)])
def test_boundary_sample_m1_examples(branch, expected):
    s = UncertaintySet([2.0], 0.5, [[1.0]])
    a = boundary_sample(s, [1.0], branch)
    assert a[0] == pytest.approx(expected, abs=1e-4)
    lo, hi = (1e-12, 1.0) if branch == "lower" else (1.0, 10.0)
    assert a[0] == pytest.approx(2.0 * _bisect(0.5, lo, hi), abs=1e-9)


def test_boundary_sample_errors():
    s = UncertaintySet([2.0, 1.0], 0.5, np.eye(2))
    with pytest.raises(ValueError):
        boundary_sample(s, [-1.0, 1.0])
    with pytest.raises(ValueError):
        boundary_sample(s, [0.0, 0.0])
    with pytest.raises(ValueError):
        boundary_sample(s, [1.0])
    with pytest.raises(ValueError):
        boundary_sample(s, [1.0, 1.0], branch="middle")


@given(st.integers(0, 10_000), st.sampled_from([1e-3, 1.0, 10.0, 1e3]))
def test_boundary_samples_are_positive_and_on_the_boundary(seed, tau):
    rng = np.random.default_rng(seed)
    s = random_set(rng, int(rng.integers(1, 6)), tau, ("l1", "l2", "linf")[seed % 3])
    d = rng.random(s.m) + 1e-3
    branch = rng.random(s.m) < 0.5
    log_a = boundary_sample_log(s, d, branch)
    assert np.all(np.isfinite(log_a))
    sz = log_a - np.log(s.a0)
    y = np.expm1(sz) - sz
    assert vector_norm(s.A @ y, s.norm) == pytest.approx(tau, rel=1e-9)
    a = boundary_sample(s, d, branch)
    assert np.all(a[log_a > -700.0] > 0.0)


def test_boundary_point_is_a_member():
    s = UncertaintySet([1.0, 2.0], 0.4, [[1.0, 0.3], [0.0, 1.0]], "l2")
    a = boundary_sample(s, [0.3, 0.7], [True, False])
    d = contains(s, a, atol=1e-9)
    assert d.inside and d.budget == pytest.approx(0.4, rel=1e-10)


# ------------------------------------------------------------ ellipsoid baseline
def test_ellipsoid_min_linear_and_argmin():
    e = EllipsoidalSet([3.0, 2.0], np.eye(2), 1.0)
    x = np.array([3.0, 4.0])
    assert e.min_linear(x) == pytest.approx(17.0 - 5.0)
    a = e.argmin_linear(x)
    assert a @ x == pytest.approx(e.min_linear(x))
    assert e.contains(a, atol=1e-9)
    assert not e.contains([0.0, 0.0])


def test_random_set_is_nonnegative_and_well_conditioned():
    rng = np.random.default_rng(0)
    s = random_set(rng, 4, 1.0)
    assert np.all(s.A >= 0.0)
    assert np.min(np.linalg.svd(s.A, compute_uv=False)) >= 0.5 - 1e-12
