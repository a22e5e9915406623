"""Options and error mapping shared by every subcommand."""

import logging
from functools import wraps
from typing import Callable, Optional

import click

from zbstein.core.errors import VerificationFailed

logger = logging.getLogger(__name__)

EXIT_VERIFICATION_FAILED = 1
EXIT_INVALID_INPUT = 2

_TOLERANCE_FLAGS = (
    ("--tol-identity", "identity_tolerance", "Residual threshold for exact identities."),
    ("--tol-mass", "mass_tolerance", "Threshold for probability mass checks."),
    ("--tol-mean", "mean_tolerance", "Threshold for mean-zero checks."),
    ("--tol-quadrature", "quadrature_tolerance", "Relative accuracy of adaptive quadrature."),
    ("--tol-stein", "stein_residual_tolerance", "Threshold for Stein equation residuals."),
)


def tolerance_options(func: Callable) -> Callable:
    """Attach the --tol-* flags; the command receives them as a ``tolerances`` mapping.

    The mapping is validated when the ExperimentConfig is built, inside run_guarded.
    """

    @wraps(func)
    def wrapper(*args, **kwargs):
        values = {field: kwargs.pop(field) for _, field, _ in _TOLERANCE_FLAGS}
        values["confidence"] = kwargs.pop("confidence")
        kwargs["tolerances"] = values
        return func(*args, **kwargs)

    wrapper = click.option(
        "--confidence", type=float, default=None, help="Confidence level of statistical checks."
    )(wrapper)
    for flag, field, text in reversed(_TOLERANCE_FLAGS):
        wrapper = click.option(flag, field, type=float, default=None, help=text)(wrapper)
    return wrapper


def parse_grid(ctx: click.Context, param: click.Parameter, value: Optional[str]):
    """Comma-separated sample sizes, e.g. 8,16,32,64."""
    if value is None:
        return []
    try:
        return [int(part) for part in value.split(",") if part.strip()]
    except ValueError:
        raise click.BadParameter(f"expected comma-separated integers, got {value!r}")


def run_guarded(body: Callable[[], None]) -> None:
    """Run a command body, mapping domain errors to exit 2 and failed checks to exit 1."""
    ctx = click.get_current_context()
    try:
        body()
    except VerificationFailed as e:
        click.echo(f"Verification failed: {e}", err=True)
        ctx.exit(EXIT_VERIFICATION_FAILED)
    except ValueError as e:
        # Domain errors and pydantic ValidationError both land here
        logger.debug("Invalid input", exc_info=True)
        click.echo(f"Error: {e}", err=True)
        ctx.exit(EXIT_INVALID_INPUT)
