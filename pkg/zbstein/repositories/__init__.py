"""Repositories package initialization."""

from .base import BaseRepository, atomic_write_text
from .inputs import DistributionRepository, FamilyRepository, PopulationRepository
from .results import ResultsRepository

__all__ = [
    "BaseRepository", "atomic_write_text",
    "DistributionRepository", "FamilyRepository", "PopulationRepository",
    "ResultsRepository",
]
