"""Exception hierarchy shared by services, repositories and the CLI."""

from typing import Optional


class ZeroBiasError(ValueError):
    """Base class for domain errors; the CLI maps these to exit code 2."""


class InvariantViolation(ZeroBiasError):
    """An input violates a named invariant."""

    def __init__(self, invariant: str, message: str):
        self.invariant = invariant
        super().__init__(f"[{invariant}] {message}")


class EnumerationCapExceeded(ZeroBiasError):
    """Exact enumeration would exceed the configured cap."""

    def __init__(self, size: int, cap: int):
        self.size = size
        self.cap = cap
        super().__init__(f"[enumeration-cap] {size} outcomes exceed cap {cap}")


class QuadratureError(ZeroBiasError):
    """Adaptive quadrature did not converge."""

    def __init__(self, message: str, x: Optional[float] = None):
        self.x = x
        super().__init__(f"[quadrature] {message}")


class DegenerateCouplingError(ZeroBiasError):
    """The coupling construction is undefined (all squared differences vanish)."""

    def __init__(self, message: str):
        super().__init__(f"[degenerate-coupling] {message}")


class VerificationFailed(Exception):
    """A verification suite or runtime assertion found a violation (exit code 1)."""

    def __init__(self, message: str, failures: int = 1):
        self.failures = failures
        super().__init__(message)
