import math
from collections import Counter

import pytest
from hypothesis import given, settings as hsettings
from hypothesis import strategies as st

from zbstein.core.config import override_settings
from zbstein.core.errors import EnumerationCapExceeded, InvariantViolation
from zbstein.core.workers import make_rng
from zbstein.services.srs import (
    asymptotic_constants,
    couple_srs,
    draw_q_pair,
    enumerate_couple_srs,
    enumerate_srs,
    exact_coupling_bound,
    exact_srs_w_star,
    hat_law_residual,
    load_population,
    sample_srs,
    srs_bound,
    srs_constants,
    srs_variance,
    symmetrize_population,
    verify_variance_terms,
)
from zbstein.services.stein import cos_function, expectation_gap
from zbstein.services.verify import grid_population
from zbstein.services.zerobias import density_difference, interpolation_density, zero_bias_density


def test_load_population_rescales(pop4):
    assert pop4.values == pytest.approx((-2 / math.sqrt(10), -1 / math.sqrt(10), 1 / math.sqrt(10), 2 / math.sqrt(10)))
    assert pop4.distinct
    assert pop4.power_sums[2] == pytest.approx(1.0, abs=1e-15)
    assert pop4.power_sums[4] == pytest.approx(0.34)
    assert pop4.power_sums[6] == pytest.approx(0.13)


def test_load_population_of_two_signs():
    pop = load_population([-1.0, 1.0])
    assert pop.values == pytest.approx((-1 / math.sqrt(2), 1 / math.sqrt(2)))


def test_load_population_rejects_skewed_values():
    with pytest.raises(InvariantViolation) as exc:
        load_population([1.0, 2.0, 3.0])
    assert exc.value.invariant == "moment-conditions"


@pytest.mark.parametrize(
    "values, invariant",
    [
        ([1.0], "population-size"),
        ([0.0, 0.0], "zero-power-sum"),
        ([-1.0, float("inf")], "finite-values"),
    ],
)
def test_load_population_errors(values, invariant):
    with pytest.raises(InvariantViolation) as exc:
        load_population(values)
    assert exc.value.invariant == invariant


@pytest.mark.parametrize("c", [1e-3, 0.1, 0.3, 2.0, 1e3])
@pytest.mark.parametrize("base", [[-2.0, -1.0, 1.0, 2.0], [-2.0, -1.0, 0.0, 1.0, 2.0]])
def test_load_population_ignores_scale(base, c):
    reference = load_population(base)
    scaled = load_population([c * v for v in base])
    assert scaled.values == pytest.approx(reference.values, abs=1e-15)
    assert scaled.distinct == reference.distinct


def test_population_model_shares_the_load_tolerance():
    with pytest.raises(InvariantViolation) as exc:
        load_population([-1.0, 1.0, 1e-9])
    assert exc.value.invariant == "moment-conditions"
    with override_settings(identity_tolerance=1e-6):
        assert load_population([-1.0, 1.0, 1e-9]).size == 3
    assert load_population([-1.0, 1.0, 1e-9], tolerance=1e-6).size == 3


def test_symmetrize_two_equal_draws():
    pop = symmetrize_population([1.0, 1.0], 4)
    assert pop.values == (-0.5, -0.5, 0.5, 0.5)
    assert not pop.distinct


def test_symmetrize_needs_half_the_draws():
    with pytest.raises(InvariantViolation) as exc:
        symmetrize_population([1.0], 4)
    assert exc.value.invariant == "population-size"
    with pytest.raises(InvariantViolation):
        symmetrize_population([1.0, 2.0], 5)


@hsettings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0.1, 10.0), min_size=1, max_size=8))
def test_symmetrized_populations_are_normalized(y):
    pop = symmetrize_population(y, 2 * len(y))
    assert pop.power_sums[2] == pytest.approx(1.0, abs=1e-12)
    assert abs(pop.power_sums[1]) < 1e-12
    assert abs(pop.power_sums[3]) < 1e-12


def test_srs_variance(pop4):
    assert srs_variance(pop4, 2) == pytest.approx(1 / 3)
    pop10 = load_population([-5.0, -4.0, -3.0, -2.0, -1.0, 1.0, 2.0, 3.0, 4.0, 5.0])
    assert srs_variance(pop10, 4) == pytest.approx(4 / 15)


def test_sample_size_must_leave_one_out(pop4):
    with pytest.raises(InvariantViolation) as exc:
        srs_variance(pop4, 4)
    assert exc.value.invariant == "sample-size"
    with pytest.raises(InvariantViolation):
        srs_constants(pop4, 0)


def test_constants_for_four_values(pop4):
    c = srs_constants(pop4, 2)
    assert c.alpha == pytest.approx(-7 / 8)
    assert c.beta == pytest.approx(-13 / 24)
    assert c.gamma == pytest.approx(-1 / 12)
    assert c.eta == pytest.approx(-1 / 8)
    assert c.rho == pytest.approx(-1.0)
    assert c.v1_sq == pytest.approx(2 / 3)
    assert c.f == 0.5


def test_c2_with_repeated_values(pm_half4):
    assert srs_constants(pm_half4, 2).c2 == pytest.approx(14.0)
    report = srs_bound(pm_half4, 2, cos_function())
    assert report.second_term == pytest.approx(5.25)
    assert report.bound == pytest.approx(report.first_term + 5.25)


def test_asymptotic_constants_at_half():
    b1, b2 = asymptotic_constants(0.5, 0.0, 0.0)
    assert b2 == pytest.approx(11.25)
    assert b1 == pytest.approx(math.sqrt(66) / 3)


@pytest.mark.parametrize("f", [0.0, 1.0, 1.5])
def test_asymptotic_constants_need_a_proper_fraction(f):
    with pytest.raises(InvariantViolation) as exc:
        asymptotic_constants(f, 0.0, 0.0)
    assert exc.value.invariant == "sampling-fraction"


def test_rho_over_a_grid_of_populations():
    for N in range(3, 51):
        pop = grid_population(N)
        for n in range(1, N):
            c = srs_constants(pop, n)
            assert c.rho == pytest.approx(-n / (N - n))
            assert c.rho == pytest.approx(1.0 - n * c.v1_sq / (2.0 * c.sigma2))


def test_sample_srs_is_uniform_over_ordered_pairs(pop4):
    rng = make_rng(5)
    counts = Counter(tuple(sample_srs(pop4, 2, rng)) for _ in range(12_000))
    assert len(counts) == 12
    assert all(abs(c - 1000) < 150 for c in counts.values())


def test_enumerate_srs_with_repeated_values(pm_half4):
    law = enumerate_srs(pm_half4, 2)
    assert law.atoms == (-1.0, 0.0, 1.0)
    assert law.probs == pytest.approx((1 / 6, 2 / 3, 1 / 6), abs=1e-15)


def test_enumeration_cap(pop5):
    with pytest.raises(EnumerationCapExceeded) as exc:
        enumerate_srs(pop5, 2, cap=1)
    assert exc.value.size == 10
    with pytest.raises(EnumerationCapExceeded):
        enumerate_couple_srs(pop5, 2, cap=10)


def test_couple_srs_draws(pop5):
    rng = make_rng(9)
    seen = set()
    for _ in range(2000):
        s = couple_srs(pop5, 3, rng)
        assert s.w == pytest.approx(math.fsum(s.sample))
        seen.add(s.r)
    assert seen == {0, 1, 2}


def test_couple_srs_with_a_forced_midpoint(pop5):
    s = couple_srs(pop5, 3, make_rng(2), u=0.5)
    assert s.w_star == pytest.approx(math.fsum(s.filled) + (s.first + s.second) / 2.0)


def test_couple_srs_needs_distinct_values(pm_half4):
    with pytest.raises(InvariantViolation) as exc:
        couple_srs(pm_half4, 2, make_rng(0))
    assert exc.value.invariant == "distinct-population"


def test_draw_q_pair_for_two_signs():
    pop = load_population([-1.0, 1.0])
    rng = make_rng(11)
    counts = Counter(draw_q_pair(pop, rng) for _ in range(10_000))
    a = 1 / math.sqrt(2)
    assert set(counts) == {(-a, a), (a, -a)}
    assert all(abs(c - 5000) < 300 for c in counts.values())


def test_draw_q_pair_weights_by_squared_difference(pop4):
    rng = make_rng(12)
    draws = [draw_q_pair(pop4, rng) for _ in range(10_000)]
    assert all(u != v for u, v in draws)
    extreme = sum(1 for u, v in draws if abs(u - v) == pytest.approx(4 / math.sqrt(10)))
    # (u - v)^2 / (2N) = 0.2 for each ordering of the extremes
    assert abs(extreme - 4000) < 300


def test_draw_q_pair_needs_distinct_values(pm_half4):
    with pytest.raises(InvariantViolation) as exc:
        draw_q_pair(pm_half4, make_rng(0))
    assert exc.value.invariant == "distinct-population"


@pytest.mark.parametrize("n", [1, 2, 3])
def test_hat_vector_law(pop5, n):
    assert hat_law_residual(pop5, n) < 1e-12


def test_hat_vector_law_for_four_values(pop4):
    assert hat_law_residual(pop4, 3) < 1e-12


@pytest.mark.parametrize("n", [2, 3])
def test_coupled_w_star_has_the_zero_bias_law(pop5, n):
    star = interpolation_density(exact_srs_w_star(pop5, n))
    assert density_difference(star, zero_bias_density(enumerate_srs(pop5, n))) < 1e-12


@pytest.mark.parametrize("n", [2, 3])
def test_variance_terms_are_below_the_constants(pop5, n):
    report = verify_variance_terms(pop5, n)
    assert report.exact
    assert report.cond_variance <= report.c1_sq
    assert report.sq_diff <= report.c2
    assert report.cond_variance <= report.cond_second_moment + 1e-15


def test_variance_terms_fall_back_to_monte_carlo(pop5):
    with override_settings(enumeration_cap=100):
        with pytest.raises(EnumerationCapExceeded):
            verify_variance_terms(pop5, 2)
        report = verify_variance_terms(pop5, 2, rng=make_rng(4), reps=2000)
    assert not report.exact
    assert report.sq_diff_stderr > 0
    assert report.sq_diff <= report.c2


@pytest.mark.parametrize("n", [2, 3])
def test_bounds_dominate_the_exact_gap(pop5, n):
    h = cos_function()
    sigma = math.sqrt(srs_variance(pop5, n))
    gap = expectation_gap(enumerate_srs(pop5, n), sigma, h)
    assert abs(gap.value) <= exact_coupling_bound(pop5, n, h).bound
    assert abs(gap.value) <= srs_bound(pop5, n, h).bound
