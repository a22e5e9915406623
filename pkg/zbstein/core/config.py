from contextlib import contextmanager
from typing import Any, Iterator

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Application settings using Pydantic Settings."""

    # Logging
    log_level: str = "WARNING"

    # Input validation
    prob_sum_tolerance: float = 1e-9
    mass_tolerance: float = 1e-12
    mean_tolerance: float = 1e-12

    # Verification thresholds
    identity_tolerance: float = 1e-12
    quadrature_tolerance: float = 1e-10
    stein_residual_tolerance: float = 1e-8
    confidence: float = Field(default=0.99, gt=0.0, lt=1.0)

    # Numerics
    gauss_hermite_nodes: int = Field(default=64, ge=2)
    enumeration_cap: int = Field(default=1_000_000, ge=1)

    # Workers (ZB_THREADS)
    threads: int = Field(default=1, ge=1)

    model_config = SettingsConfigDict(
        env_prefix="ZB_",
        env_file=".env",
        case_sensitive=False,
        extra="ignore",
    )


settings = Settings()


@contextmanager
def override_settings(**overrides: Any) -> Iterator[Settings]:
    """Temporarily replace settings fields; None values are ignored."""
    applied = {key: value for key, value in overrides.items() if value is not None}
    previous = {key: getattr(settings, key) for key in applied}
    for key, value in applied.items():
        setattr(settings, key, value)
    try:
        yield settings
    finally:
        for key, value in previous.items():
            setattr(settings, key, value)
