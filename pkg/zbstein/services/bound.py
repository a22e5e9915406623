import logging
import math
from typing import Optional

from zbstein.core.errors import InvariantViolation
from zbstein.models import BoundReport, DiscreteDistribution, TestFunction
from zbstein.repositories import DistributionRepository, PopulationRepository, ResultsRepository
from zbstein.schemas import ExperimentConfig
from zbstein.services.base import BaseCommandService
from zbstein.services.dist import abs_moment, moment, require_mean_zero
from zbstein.services.srs import srs_bound
from zbstein.services.stein import (
    clt_iid_bound,
    get_test_function,
    iid_fourth_moment_bound,
    user_function,
    zero_bias_bound,
)

logger = logging.getLogger(__name__)

BOUND_METHODS = ("coupling", "iid", "clt", "srs")


def _undeclared(_x):
    raise InvariantViolation("undeclared-derivative", "function was declared by its norms only")


def resolve_test_function(name: str, norm3: Optional[float] = None, norm4: Optional[float] = None) -> TestFunction:
    """Registered function by name, or a norms-only declaration when both norms are given."""
    if norm3 is not None or norm4 is not None:
        if norm3 is None or norm4 is None:
            raise InvariantViolation("missing-norm", "declare both --norm3 and --norm4")
        return user_function(name, [_undeclared] * 5, (math.inf, math.inf, norm3, norm4))
    try:
        return get_test_function(name)
    except InvariantViolation:
        raise InvariantViolation(
            "missing-norm", f"{name!r} is not registered; declare its norms with --norm3 and --norm4"
        )


def standardized_moments(d: DiscreteDistribution):
    """(EX^3, EX^4, E|X|^3) of d scaled to unit variance."""
    sigma2 = require_mean_zero(d)
    s = math.sqrt(sigma2)
    return moment(d, 3) / s ** 3, moment(d, 4) / sigma2 ** 2, abs_moment(d, 3) / s ** 3


class BoundService(BaseCommandService[BoundReport]):
    """Service for the bound command."""

    def __init__(
        self,
        distributions: Optional[DistributionRepository] = None,
        populations: Optional[PopulationRepository] = None,
        results: Optional[ResultsRepository] = None,
    ):
        super().__init__(results)
        self.distributions = distributions or DistributionRepository()
        self.populations = populations or PopulationRepository()

    def execute(self, config: ExperimentConfig) -> BoundReport:
        method = config.method or "coupling"
        if method not in BOUND_METHODS:
            raise InvariantViolation("bound-method", f"unknown method {method!r}; choose from {BOUND_METHODS}")
        h = resolve_test_function(config.h, config.norm3, config.norm4)

        if method == "srs":
            if config.input is None or config.n is None:
                raise InvariantViolation("missing-input", "srs bound needs --input population and --n")
            return srs_bound(self.populations.load(config.input), config.n, h)

        if method == "coupling":
            if config.sigma is None or config.cond_var is None or config.sq_diff is None:
                raise InvariantViolation("missing-input", "coupling bound needs --sigma, --cond-var and --sq-diff")
            return zero_bias_bound(config.sigma, h, config.cond_var, config.sq_diff)

        if config.n is None:
            raise InvariantViolation("missing-input", f"{method} bound needs --n")
        third, fourth, abs3 = 0.0, config.fourth_moment, config.abs3
        if config.input is not None:
            third, fourth, abs3 = standardized_moments(self.distributions.load(config.input))
            logger.info(f"Standardized moments: EX^3={third!r}, EX^4={fourth!r}, E|X|^3={abs3!r}")

        if method == "iid":
            if fourth is None:
                raise InvariantViolation("missing-input", "iid bound needs --fourth-moment or --input")
            return iid_fourth_moment_bound(config.n, fourth, h, third_moment=third)
        if abs3 is None:
            raise InvariantViolation("missing-input", "clt bound needs --abs3 or --input")
        return clt_iid_bound(config.n, abs3, h)
