"""Shared fixtures: seeded generators, small laws and populations."""

from pathlib import Path

import pytest

from zbstein.core.workers import make_rng
from zbstein.services.dist import make_discrete
from zbstein.services.srs import load_population

FIXTURES = Path(__file__).resolve().parent.parent / "zbstein" / "fixtures"


@pytest.fixture
def rng():
    return make_rng(20240601)


@pytest.fixture
def pm1():
    return make_discrete([-1.0, 1.0], [0.5, 0.5])


@pytest.fixture
def three_point():
    return make_discrete([-1.0, 0.0, 1.0], [0.25, 0.5, 0.25])


@pytest.fixture
def skewed():
    return make_discrete([-2.0, 0.5], [0.2, 0.8])


@pytest.fixture
def pop4():
    """{-2, -1, 1, 2} rescaled."""
    return load_population([-2.0, -1.0, 1.0, 2.0])


@pytest.fixture
def pop5():
    return load_population([-2.0, -1.0, 0.0, 1.0, 2.0])


@pytest.fixture
def pm_half4():
    """N = 4 equal-magnitude population with repeated values."""
    return load_population([-0.5, -0.5, 0.5, 0.5])


@pytest.fixture
def fixture_root():
    return FIXTURES
