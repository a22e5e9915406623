"""Core module initialization."""

from .config import override_settings, settings
from .errors import (
    DegenerateCouplingError,
    EnumerationCapExceeded,
    InvariantViolation,
    QuadratureError,
    VerificationFailed,
    ZeroBiasError,
)
from .workers import make_rng, run_ordered

__all__ = [
    "settings", "override_settings",
    "ZeroBiasError", "InvariantViolation", "EnumerationCapExceeded",
    "QuadratureError", "DegenerateCouplingError", "VerificationFailed",
    "make_rng", "run_ordered",
]
