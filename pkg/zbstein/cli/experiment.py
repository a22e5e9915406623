from pathlib import Path
from typing import List, Optional

import click

from zbstein.cli.common import parse_grid, run_guarded, tolerance_options
from zbstein.schemas import Command, ExperimentConfig, YLaw
from zbstein.services.experiment import SrsExperimentService


@click.command("srs-experiment")
@click.option("--seed", type=int, default=None, help="Master seed (required).")
@click.option("--reps", type=int, default=20_000, show_default=True, help="Monte Carlo draws when enumeration is capped.")
@click.option("--n-grid", "n_grid", callback=parse_grid, default=None, help="Increasing sample sizes, e.g. 8,16,32,64.")
@click.option("--fraction", type=float, default=None, help="Sampling fraction f = n/N for symmetrized populations.")
@click.option("--h", "h_name", default="cos", show_default=True, help="Registered test function.")
@click.option("--y-law", type=click.Choice([law.value for law in YLaw]), default=YLaw.PM1.value, show_default=True,
              help="Law of the symmetrization draws.")
@click.option("--input", "input_path", type=click.Path(path_type=Path), default=None,
              help="Population file used for every grid point instead of symmetrization.")
@click.option("--out", type=click.Path(path_type=Path), default=None, help="Write the CSV here.")
@tolerance_options
def srs_experiment(
    seed: Optional[int],
    reps: int,
    n_grid: List[int],
    fraction: Optional[float],
    h_name: str,
    y_law: str,
    input_path: Optional[Path],
    out: Optional[Path],
    tolerances,
) -> None:
    """Gap against the SRS bound over an n-grid, with the log-log slope of the gap."""

    def body() -> None:
        config = ExperimentConfig(
            command=Command.SRS_EXPERIMENT,
            seed=seed,
            reps=reps,
            n_grid=n_grid,
            fraction=fraction,
            h=h_name,
            y_law=YLaw(y_law),
            input=input_path,
            out=out,
            tolerances=tolerances,
        )
        service = SrsExperimentService()
        result = service.run(config)
        text = service.write(config, result)
        if out is None:
            click.echo(text, nl=False)

    run_guarded(body)
