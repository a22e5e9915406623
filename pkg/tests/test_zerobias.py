import math

import numpy as np
import pytest
from hypothesis import given, settings as hsettings
from hypothesis import strategies as st
from numpy.polynomial import Polynomial

from zbstein.core.errors import DegenerateCouplingError, InvariantViolation
from zbstein.core.workers import make_rng
from zbstein.models import PairDistribution
from zbstein.services.dist import (
    abs_moment,
    center,
    ks_critical_value,
    ks_statistic,
    make_discrete,
    normal_discretization,
)
from zbstein.services.zerobias import (
    characterization_residual,
    density_cdf,
    density_difference,
    density_mass,
    density_moment,
    exchangeable_pair_zero_bias,
    interpolation_density,
    is_symmetric_density,
    is_unimodal,
    product_pair,
    sample_density,
    sample_zero_bias,
    sample_zero_bias_many,
    square_bias_pair,
    wasserstein_to_discrete,
    zero_bias_abs_moment,
    zero_bias_density,
    zero_bias_moment,
)


def discrete_laws():
    """Centered laws on at most ten atoms of a 1/16 grid."""
    atoms = st.lists(st.integers(-32, 32), min_size=2, max_size=10, unique=True)
    return atoms.flatmap(
        lambda a: st.lists(st.integers(1, 20), min_size=len(a), max_size=len(a)).map(
            lambda w: center(make_discrete([x / 16.0 for x in a], [x / sum(w) for x in w]))
        )
    )


def polynomials():
    return st.lists(st.integers(-1, 1), min_size=2, max_size=7).map(lambda c: Polynomial([float(x) for x in c]))


def test_two_point_law_gives_uniform_density(pm1):
    """Fair signs transform to the uniform law on [-1, 1] with bit-exact breakpoints."""
    density = zero_bias_density(pm1)
    assert density.breakpoints == (-1.0, 1.0)
    assert density.densities == (0.5,)


def test_three_point_law(three_point):
    density = zero_bias_density(three_point)
    assert density.breakpoints == (-1.0, 0.0, 1.0)
    assert density.densities == pytest.approx((0.5, 0.5), abs=1e-15)


def test_skewed_law(skewed):
    density = zero_bias_density(skewed)
    assert density.breakpoints == (-2.0, 0.5)
    assert density.densities[0] == pytest.approx(0.4, abs=1e-15)
    assert density_mass(density) == pytest.approx(1.0, abs=1e-12)


def test_nonzero_mean_is_rejected():
    with pytest.raises(InvariantViolation) as exc:
        zero_bias_density(make_discrete([0.0, 1.0], [0.5, 0.5]))
    assert exc.value.invariant == "mean-zero"


def test_zero_bias_moments(pm1, three_point):
    assert zero_bias_moment(pm1, 1) == 0.0
    assert zero_bias_moment(pm1, 2) == pytest.approx(1 / 3)
    assert zero_bias_moment(three_point, 1) == 0.0
    assert density_moment(zero_bias_density(pm1), 2) == pytest.approx(1 / 3, abs=1e-15)


def test_abs_moment_identity(skewed):
    """E|W*| equals E|W|^3 / (2 sigma^2)."""
    assert zero_bias_abs_moment(skewed) == pytest.approx(abs_moment(skewed, 3) / 2.0, abs=1e-12)


def test_characterization_for_linear_and_quadratic(skewed, three_point):
    assert abs(characterization_residual(skewed, [0.0, 1.0])) < 1e-12
    assert abs(characterization_residual(three_point, [0.0, 0.0, 0.5])) < 1e-12


@hsettings(max_examples=50, deadline=None)
@given(discrete_laws(), polynomials())
def test_characterizing_identity(d, f):
    """E W f(W) = sigma^2 E f'(W*) for polynomials of degree at most six."""
    scale = max(1.0, math.fsum(p * abs(a * f(a)) for a, p in zip(d.atoms, d.probs)))
    assert abs(characterization_residual(d, f)) / scale < 1e-12


@hsettings(max_examples=50, deadline=None)
@given(discrete_laws(), st.integers(1, 4))
def test_moment_identity(d, n):
    expected = zero_bias_moment(d, n)
    assert abs(density_moment(zero_bias_density(d), n) - expected) <= 1e-12 * max(1.0, abs(expected))


@hsettings(max_examples=50, deadline=None)
@given(discrete_laws())
def test_density_properties(d):
    """Mass one, unimodal, and supported on the atom hull."""
    density = zero_bias_density(d)
    assert density_mass(density) == pytest.approx(1.0, abs=1e-12)
    assert is_unimodal(density)
    assert density.support == (d.atoms[0], d.atoms[-1])


def test_symmetric_law_has_symmetric_density(three_point):
    assert is_symmetric_density(zero_bias_density(three_point))


def test_square_bias_pair_of_signs(pm1):
    pair = square_bias_pair(pm1)
    assert sorted(zip(pair.pairs, pair.probs)) == [((-1.0, 1.0), 0.5), ((1.0, -1.0), 0.5)]


@hsettings(max_examples=30, deadline=None)
@given(discrete_laws())
def test_square_bias_pair_is_normalized_off_diagonal(d):
    pair = square_bias_pair(d)
    assert math.fsum(pair.probs) == pytest.approx(1.0, abs=1e-12)
    assert all(u != v for u, v in pair.pairs)


@hsettings(max_examples=30, deadline=None)
@given(discrete_laws())
def test_interpolated_square_bias_pair_is_the_zero_bias_law(d):
    interpolated = interpolation_density(square_bias_pair(d))
    assert density_difference(interpolated, zero_bias_density(d)) < 1e-12


def test_forced_midpoint(rng):
    pair = PairDistribution(pairs=((-1.0, 1.0),), probs=(1.0,))
    assert sample_zero_bias(pair, rng, u=0.5) == 0.0


def test_zero_bias_draws_are_uniform(pm1):
    """KS distance of 10^5 draws against the uniform law on [-1, 1]."""
    draws = sample_zero_bias_many(square_bias_pair(pm1), make_rng(11), 100_000)
    statistic = ks_statistic(draws, lambda x: np.clip((x + 1.0) / 2.0, 0.0, 1.0))
    assert statistic < ks_critical_value(100_000, 0.99)


def test_sample_density_matches_cdf(skewed):
    density = zero_bias_density(skewed)
    draws = sample_density(density, make_rng(3), 50_000)
    statistic = ks_statistic(draws, lambda x: density_cdf(density, x))
    assert statistic < ks_critical_value(50_000, 0.99)


def test_product_pair_reweights_to_square_bias(skewed):
    """Reweighting two independent copies gives the square-bias pair."""
    from_product = interpolation_density(exchangeable_pair_zero_bias(product_pair(skewed)))
    assert density_difference(from_product, zero_bias_density(skewed)) < 1e-12


def test_exchangeable_three_atom_joint():
    """A dependent exchangeable joint reweights to the zero-bias law of its marginal."""
    pairs = ((-1.0, 0.0), (0.0, -1.0), (0.0, 1.0), (1.0, 0.0), (-1.0, 1.0), (1.0, -1.0), (0.0, 0.0))
    probs = (0.125, 0.125, 0.125, 0.125, 0.0625, 0.0625, 0.375)
    joint = PairDistribution(pairs=pairs, probs=probs, exchangeable=True)
    marginal = make_discrete([-1.0, 0.0, 1.0], [0.1875, 0.625, 0.1875])
    reweighted = interpolation_density(exchangeable_pair_zero_bias(joint))
    # E(W' | W) = -W / 3 for this joint
    assert density_difference(reweighted, zero_bias_density(marginal)) < 1e-12


def test_degenerate_pair_is_rejected():
    joint = PairDistribution(pairs=((-1.0, -1.0), (1.0, 1.0)), probs=(0.5, 0.5), exchangeable=True)
    with pytest.raises(DegenerateCouplingError):
        exchangeable_pair_zero_bias(joint)


def test_asymmetric_pair_is_rejected():
    joint = PairDistribution(pairs=((-1.0, 1.0), (1.0, -1.0)), probs=(0.75, 0.25))
    with pytest.raises(InvariantViolation) as exc:
        exchangeable_pair_zero_bias(joint)
    assert exc.value.invariant == "exchangeable"


def test_normal_grid_is_nearly_a_fixed_point():
    grid = normal_discretization()
    assert wasserstein_to_discrete(grid, zero_bias_density(grid)) < 0.01
