from pathlib import Path
from typing import Optional

import click

from zbstein.cli.common import run_guarded, tolerance_options
from zbstein.schemas import Command, ExperimentConfig
from zbstein.services.verify import VerifyService


@click.command("verify")
@click.option("--fixtures", type=click.Path(path_type=Path), default=None,
              help="Fixture directory (distributions/, populations/, families/); defaults to the shipped set.")
@click.option("--input", "input_path", type=click.Path(path_type=Path), default=None,
              help="Extra family JSON file to check.")
@click.option("--seed", type=int, default=0, show_default=True, help="Seed of the random identity suite.")
@click.option("--out", type=click.Path(path_type=Path), default=None, help="Write the residual CSV here.")
@tolerance_options
def verify(fixtures: Optional[Path], input_path: Optional[Path], seed: int, out: Optional[Path], tolerances) -> None:
    """Run every verification suite; exit 1 if any residual exceeds its tolerance."""

    def body() -> None:
        config = ExperimentConfig(
            command=Command.VERIFY, fixtures=fixtures, input=input_path, seed=seed, out=out, tolerances=tolerances
        )
        service = VerifyService()
        rows = service.run(config)
        text = service.write(config, rows)
        if out is None:
            click.echo(text, nl=False)
        service.check(rows)

    run_guarded(body)
