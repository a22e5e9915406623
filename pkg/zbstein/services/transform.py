import logging
from typing import Optional

from zbstein.core.errors import InvariantViolation
from zbstein.repositories import DistributionRepository, ResultsRepository
from zbstein.schemas import DensityResponse, ExperimentConfig
from zbstein.services.base import BaseCommandService
from zbstein.services.zerobias import zero_bias_density

logger = logging.getLogger(__name__)


class TransformService(BaseCommandService[DensityResponse]):
    """Service for the transform command."""

    def __init__(
        self,
        distributions: Optional[DistributionRepository] = None,
        results: Optional[ResultsRepository] = None,
    ):
        super().__init__(results)
        self.distributions = distributions or DistributionRepository()

    def execute(self, config: ExperimentConfig) -> DensityResponse:
        if config.input is None:
            raise InvariantViolation("input-file", "transform needs --input")
        d = self.distributions.load(config.input)
        density = zero_bias_density(d)
        logger.info(f"Transformed {d.size} atoms into {len(density.densities)} pieces")
        return DensityResponse.from_density(density)
