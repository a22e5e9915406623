from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, Field, field_validator, model_validator

from zbstein.core.config import settings


class Command(str, Enum):
    TRANSFORM = "transform"
    VERIFY = "verify"
    SRS_EXPERIMENT = "srs-experiment"
    BOUND = "bound"


class YLaw(str, Enum):
    """Law of the draws used to symmetrize a population."""
    PM1 = "pm1"
    NORMAL = "normal"
    UNIFORM = "uniform"


STOCHASTIC_COMMANDS = {Command.SRS_EXPERIMENT}


class Tolerances(BaseModel):
    """Per-run overrides of the settings tolerance ledger."""
    identity_tolerance: Optional[float] = Field(None, ge=0.0)
    mass_tolerance: Optional[float] = Field(None, ge=0.0)
    mean_tolerance: Optional[float] = Field(None, ge=0.0)
    quadrature_tolerance: Optional[float] = Field(None, gt=0.0)
    stein_residual_tolerance: Optional[float] = Field(None, ge=0.0)
    confidence: Optional[float] = Field(None, gt=0.0, lt=1.0)

    def resolved(self) -> Dict[str, float]:
        """Every tolerance, falling back to the settings ledger."""
        return {
            name: getattr(settings, name) if value is None else value
            for name, value in self.model_dump().items()
        }


class ExperimentConfig(BaseModel):
    """Schema for one CLI invocation."""
    command: Command
    input: Optional[Path] = None
    fixtures: Optional[Path] = None
    out: Optional[Path] = None
    seed: Optional[int] = Field(None, ge=0)
    reps: int = Field(20_000, ge=2)
    n: Optional[int] = Field(None, ge=1)
    n_grid: List[int] = Field(default_factory=list)
    fraction: Optional[float] = Field(None, gt=0.0, lt=1.0)
    h: str = "cos"
    y_law: YLaw = YLaw.PM1
    method: Optional[str] = None
    norm3: Optional[float] = Field(None, ge=0.0)
    norm4: Optional[float] = Field(None, ge=0.0)
    fourth_moment: Optional[float] = Field(None, ge=0.0)
    abs3: Optional[float] = Field(None, ge=0.0)
    sigma: Optional[float] = Field(None, gt=0.0)
    cond_var: Optional[float] = Field(None, ge=0.0)
    sq_diff: Optional[float] = Field(None, ge=0.0)
    tolerances: Tolerances = Field(default_factory=Tolerances)

    @field_validator("n_grid")
    @classmethod
    def _check_grid(cls, v: List[int]) -> List[int]:
        if any(k < 1 for k in v):
            raise ValueError("[n-grid] sample sizes must be positive")
        if any(b <= a for a, b in zip(v, v[1:])):
            raise ValueError("[n-grid] n-grid must be strictly increasing")
        return v

    @model_validator(mode="after")
    def _check_seed(self) -> "ExperimentConfig":
        if self.command in STOCHASTIC_COMMANDS and self.seed is None:
            raise ValueError(f"[seed-required] {self.command.value} needs --seed")
        return self

    def echo(self) -> Dict[str, Any]:
        """Config as plain JSON values for the run record."""
        return self.model_dump(mode="json")
