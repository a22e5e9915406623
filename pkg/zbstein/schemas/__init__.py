"""Schemas package initialization."""

from .files import DistributionFile, FamilyFile, FamilyLawEntry, JointLawFile
from .results import DensityResponse, ExperimentRow, ResidualRow, RunRecord
from .experiment import Command, ExperimentConfig, Tolerances, YLaw

__all__ = [
    "DistributionFile", "FamilyFile", "FamilyLawEntry", "JointLawFile",
    "DensityResponse", "ExperimentRow", "ResidualRow", "RunRecord",
    "Command", "ExperimentConfig", "Tolerances", "YLaw",
]
