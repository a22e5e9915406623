from typing import Any, Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field

from zbstein.models import PiecewiseUniformDensity


class DensityResponse(BaseModel):
    """Schema for the transform output."""
    breakpoints: List[float]
    densities: List[float]

    @classmethod
    def from_density(cls, density: PiecewiseUniformDensity) -> "DensityResponse":
        return cls(breakpoints=list(density.breakpoints), densities=list(density.densities))


class ResidualRow(BaseModel):
    """One verification check; a case that could not run carries an infinite residual."""
    model_config = ConfigDict(ser_json_inf_nan="constants")

    suite: str
    case: str
    quantity: str
    residual: float
    tolerance: float
    passed: bool


class ExperimentRow(BaseModel):
    """One grid point of the sampling-rate experiment."""
    model_config = ConfigDict(populate_by_name=True)

    N: int
    n: int
    f: float
    sigma2: float
    C1: float
    C2: float
    bound: float
    gap_exact_or_mc: float
    gap_stderr: float
    seed: int
    exact: bool
    B1: float
    B2: float
    asymptotic_bound: float = Field(..., description="(B1 ||h'''|| + B2 ||h''''||) / n")
    n_abs_gap: float


class RunRecord(BaseModel):
    """Sidecar describing a run; the only artifact carrying wall-clock data."""
    command: str
    config: Dict[str, Any]
    rows: int
    versions: Dict[str, str]
    started_at: str
    wall_clock_seconds: float
    loglog_slope: Optional[float] = None
    failures: int = 0
