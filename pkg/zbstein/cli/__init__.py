"""Command-line interface: ``zbstein transform | verify | srs-experiment | bound``."""

from typing import Optional

import click

from zbstein import __version__
from zbstein.core.logging import configure_logging

from .bound import bound
from .experiment import srs_experiment
from .transform import transform
from .verify import verify


@click.group()
@click.version_option(__version__, prog_name="zbstein")
@click.option("--verbose", "-v", is_flag=True, help="Log at DEBUG level on stderr.")
@click.option("--log-level", default=None, help="Log level; defaults to ZB_LOG_LEVEL.")
def main(verbose: bool, log_level: Optional[str]) -> None:
    """Zero-bias couplings and Stein error bounds for normal approximation."""
    configure_logging("DEBUG" if verbose else log_level)


main.add_command(transform)
main.add_command(verify)
main.add_command(srs_experiment)
main.add_command(bound)

__all__ = ["main"]
