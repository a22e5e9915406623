from pathlib import Path
from typing import Optional

import click

from zbstein.cli.common import run_guarded, tolerance_options
from zbstein.schemas import Command, ExperimentConfig
from zbstein.services.transform import TransformService


@click.command("transform")
@click.option("--input", "input_path", type=click.Path(path_type=Path), required=True,
              help="Distribution JSON file.")
@click.option("--out", type=click.Path(path_type=Path), default=None, help="Write the density JSON here.")
@tolerance_options
def transform(input_path: Path, out: Optional[Path], tolerances) -> None:
    """Zero-bias density of a finite mean-zero distribution."""

    def body() -> None:
        config = ExperimentConfig(command=Command.TRANSFORM, input=input_path, out=out, tolerances=tolerances)
        service = TransformService()
        response = service.run(config)
        if out is not None:
            service.results.write_json(out, response)
            service.write_record(config)
        else:
            click.echo(service.results.render_json(response), nl=False)

    run_guarded(body)
