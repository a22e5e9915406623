from pathlib import Path
from typing import List

import pandas as pd

from zbstein.core.errors import InvariantViolation
from zbstein.models import DependentFamily, DiscreteDistribution, Population
from zbstein.repositories.base import BaseRepository
from zbstein.schemas import DistributionFile, FamilyFile
from zbstein.services.dist import make_discrete
from zbstein.services.srs import load_population


class DistributionRepository(BaseRepository[DiscreteDistribution]):
    """Repository for {"atoms": [...], "probs": [...]} files."""

    def _parse(self, path: Path) -> DiscreteDistribution:
        payload = DistributionFile.model_validate_json(path.read_text(encoding="utf-8"))
        return make_discrete(payload.atoms, payload.probs)

    def _render(self, obj: DiscreteDistribution) -> str:
        return DistributionFile(atoms=list(obj.atoms), probs=list(obj.probs)).model_dump_json(indent=2)


class PopulationRepository(BaseRepository[Population]):
    """Repository for population files: one decimal per line, '#' comments allowed."""

    suffix = ".txt"

    def read_values(self, path: Path) -> List[float]:
        target = self.resolve(path)
        try:
            frame = pd.read_csv(
                target, comment="#", header=None, skip_blank_lines=True, skipinitialspace=True, dtype=float
            )
        except pd.errors.EmptyDataError:
            raise InvariantViolation("population-size", f"{target} holds no values")
        if frame.shape[1] != 1:
            raise InvariantViolation("input-file", f"{target} must hold one value per line")
        return frame.iloc[:, 0].tolist()

    def _parse(self, path: Path) -> Population:
        return load_population(self.read_values(path))

    def _render(self, obj: Population) -> str:
        return "".join(f"{v!r}\n" for v in obj.values)


class FamilyRepository(BaseRepository[DependentFamily]):
    """Repository for dependent family files."""

    def _parse(self, path: Path) -> DependentFamily:
        return FamilyFile.model_validate_json(path.read_text(encoding="utf-8")).to_family()

    def _render(self, obj: DependentFamily) -> str:
        return FamilyFile.from_family(obj).model_dump_json(indent=2)
