import math

import numpy as np
import pytest

from zbstein.core.errors import InvariantViolation
from zbstein.models import SumModel
from zbstein.services.dist import convolve_all, make_discrete, normal_discretization, point_mass, sample
from zbstein.services.stein import (
    LOGISTIC_NORMS,
    clt_iid_bound,
    clt_independent_bound,
    cos_function,
    expectation_gap,
    first_order_bound,
    get_test_function,
    iid_fourth_moment_bound,
    logistic_function,
    normal_expectation,
    polynomial_function,
    register_test_function,
    registered_test_functions,
    solution_norm_bound,
    stein_identity_gap,
    stein_residual,
    stein_solution,
    user_function,
    validate_norms,
    zero_bias_bound,
)


def identity_function():
    return user_function(
        "identity",
        [lambda x: x, lambda x: np.ones_like(np.asarray(x, dtype=float)), *[lambda x: np.zeros_like(np.asarray(x, dtype=float))] * 3],
        (1.0, 0.0, 0.0, 0.0),
    )


def constant_function():
    zero = lambda x: np.zeros_like(np.asarray(x, dtype=float))  # noqa: E731
    return user_function("constant", [lambda x: np.full_like(np.asarray(x, dtype=float), 2.0), zero, zero, zero, zero],
                         (0.0, 0.0, 0.0, 0.0))


def test_normal_expectations():
    square = polynomial_function([0.0, 0.0, 1.0], -10.0, 10.0)
    assert normal_expectation(square) == pytest.approx(1.0, abs=1e-12)
    assert normal_expectation(cos_function()) == pytest.approx(math.exp(-0.5), abs=1e-12)
    assert abs(normal_expectation(get_test_function("sin"))) < 1e-12


def test_constant_function_has_zero_solution():
    h = constant_function()
    for x in (-2.0, 0.0, 1.5):
        assert stein_solution(h, 1.0, x) == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("x", [-3.0, -0.5, 0.0, 0.7, 4.0])
def test_identity_function_has_unit_slope(x):
    """h(x) = x, sigma = 1: f' is identically one."""
    assert stein_solution(identity_function(), 1.0, x) == pytest.approx(1.0, abs=1e-8)


@pytest.mark.parametrize("name", ["cos", "sin", "logistic"])
@pytest.mark.parametrize("sigma", [1.0, 2.0])
def test_stein_residual_is_small(name, sigma):
    h = get_test_function(name)
    phi = normal_expectation(h)
    for x in np.linspace(-5.0, 5.0, 21):
        assert abs(stein_residual(h, sigma, float(x), phi)) < 1e-8


def test_solution_norm_bound():
    assert solution_norm_bound(1.0, 3, 1.0) == pytest.approx(1 / 3)
    assert solution_norm_bound(2.0, 2, 4.0) == pytest.approx(0.5)
    with pytest.raises(InvariantViolation):
        solution_norm_bound(0.0, 1, 1.0)


def test_logistic_norms():
    assert LOGISTIC_NORMS[:3] == (0.25, math.sqrt(3.0) / 18.0, 0.125)
    assert LOGISTIC_NORMS[3] == pytest.approx(0.127684, abs=1e-5)
    validate_norms(logistic_function())


def test_understated_norm_is_rejected():
    h = cos_function()
    bad = user_function("bad-cos", h.derivatives, (1.0, 1.0, 0.5, 1.0))
    with pytest.raises(InvariantViolation) as exc:
        register_test_function(bad)
    assert exc.value.invariant == "declared-norm"


def test_registry_builds_scaled_functions():
    h = get_test_function("cos:2")
    assert h.norms == (2.0, 4.0, 8.0, 16.0)
    assert "cos:2" in registered_test_functions()
    with pytest.raises(InvariantViolation) as exc:
        get_test_function("tanh")
    assert exc.value.invariant == "unknown-test-function"


def test_polynomial_norms_are_exact_maxima():
    h = polynomial_function([0.0, 0.0, 0.0, 0.0, 1.0], -1.0, 2.0)
    assert h.norm(3) == pytest.approx(48.0)
    assert h.norm(4) == pytest.approx(24.0)


def test_zero_coupling_terms_give_zero_bound():
    report = zero_bias_bound(1.0, cos_function(), 0.0, 0.0)
    assert report.bound == 0.0


def test_coupling_bound_terms():
    report = zero_bias_bound(2.0, cos_function(), 0.09, 0.5)
    assert report.first_term == pytest.approx(0.3 / 6.0)
    assert report.second_term == pytest.approx(0.5 / 32.0)
    assert report.bound == report.first_term + report.second_term


def test_iid_bound_for_ten_signs():
    """n = 10, EX^4 = 1, unit norms: (1/10)(1/3 + 1/6) = 0.05."""
    report = iid_fourth_moment_bound(10, 1.0, cos_function())
    assert report.bound == pytest.approx(0.05, abs=1e-15)
    doubled = iid_fourth_moment_bound(10, 2.0, cos_function())
    assert doubled.second_term == pytest.approx(2.0 * report.second_term)
    assert iid_fourth_moment_bound(40, 1.0, cos_function()).bound == pytest.approx(report.bound / 4.0)


def test_iid_bound_needs_vanishing_third_moment():
    with pytest.raises(InvariantViolation) as exc:
        iid_fourth_moment_bound(10, 1.0, cos_function(), third_moment=0.1)
    assert exc.value.invariant == "vanishing-third-moment"


def test_clt_bound():
    assert clt_iid_bound(100, 1.0, cos_function()).bound == pytest.approx(0.05)
    assert clt_iid_bound(10_000, 1.0, cos_function()).bound == pytest.approx(0.005)


def test_first_order_bound():
    assert first_order_bound(1.0, cos_function(), 0.3).bound == pytest.approx(0.1)


def test_clt_independent_bound_dominates_gap(pm1, three_point, skewed):
    model = SumModel(summands=(pm1, three_point, skewed))
    w_law = convolve_all(model.summands)
    h = cos_function()
    gap = expectation_gap(w_law, math.sqrt(model.total_variance), h)
    assert abs(gap.value) <= clt_independent_bound(model, h).bound


def test_ten_signs_gap_is_within_the_iid_bound(pm1):
    w_law = convolve_all([pm1] * 10)
    gap = expectation_gap(w_law, math.sqrt(10.0), cos_function())
    assert gap.exact
    assert gap.value == pytest.approx(math.cos(1 / math.sqrt(10.0)) ** 10 - math.exp(-0.5), abs=1e-12)
    assert abs(gap.value) <= 0.05


def test_point_mass_gap():
    gap = expectation_gap(point_mass(0.0), 1.0, cos_function())
    assert gap.value == pytest.approx(1.0 - math.exp(-0.5), abs=1e-12)


def test_normal_grid_gap_is_small():
    gap = expectation_gap(normal_discretization(), 1.0, cos_function())
    assert abs(gap.value) < 1e-3


def test_monte_carlo_gap_reports_stderr(pm1, rng):
    gap = expectation_gap(lambda g, k: sample(pm1, g, k), 1.0, cos_function(), rng=rng, count=10_000)
    assert not gap.exact
    assert gap.count == 10_000
    assert abs(gap.value - (math.cos(1.0) - math.exp(-0.5))) < 1e-12 + 5 * gap.stderr


def test_monte_carlo_gap_needs_a_generator(pm1):
    with pytest.raises(InvariantViolation):
        expectation_gap(lambda g, k: sample(pm1, g, k), 1.0, cos_function())


def test_stein_identity_gap_matches_expectation_gap(three_point):
    """E[W f'(W) - sigma^2 f''(W)] equals E h(W/sigma) - Phi h."""
    sigma = math.sqrt(0.5)
    h = cos_function()
    assert stein_identity_gap(three_point, sigma, h) == pytest.approx(
        expectation_gap(three_point, sigma, h).value, abs=1e-8
    )


def test_sigma_must_be_positive():
    with pytest.raises(InvariantViolation):
        expectation_gap(make_discrete([0.0, 1.0], [0.5, 0.5]), 0.0, cos_function())
