from pathlib import Path
from typing import Optional

import click

from zbstein.cli.common import run_guarded, tolerance_options
from zbstein.schemas import Command, ExperimentConfig
from zbstein.services.bound import BOUND_METHODS, BoundService


@click.command("bound")
@click.option("--method", type=click.Choice(BOUND_METHODS), default="coupling", show_default=True)
@click.option("--h", "h_name", default="cos", show_default=True, help="Registered test function or a name for --norm3/--norm4.")
@click.option("--norm3", type=float, default=None, help="Declared sup norm of h'''.")
@click.option("--norm4", type=float, default=None, help="Declared sup norm of h''''.")
@click.option("--n", "n", type=int, default=None, help="Number of summands or sample size.")
@click.option("--fourth-moment", type=float, default=None, help="EX^4 of the standardized summand (iid).")
@click.option("--abs3", type=float, default=None, help="E|X|^3 of the standardized summand (clt).")
@click.option("--sigma", type=float, default=None, help="Standard deviation of W (coupling).")
@click.option("--cond-var", type=float, default=None, help="E{E(W*-W|W)^2} (coupling).")
@click.option("--sq-diff", type=float, default=None, help="E(W*-W)^2 (coupling).")
@click.option("--input", "input_path", type=click.Path(path_type=Path), default=None,
              help="Population file (srs) or summand distribution file (iid, clt).")
@click.option("--out", type=click.Path(path_type=Path), default=None, help="Write the report JSON here.")
@tolerance_options
def bound(
    method: str,
    h_name: str,
    norm3: Optional[float],
    norm4: Optional[float],
    n: Optional[int],
    fourth_moment: Optional[float],
    abs3: Optional[float],
    sigma: Optional[float],
    cond_var: Optional[float],
    sq_diff: Optional[float],
    input_path: Optional[Path],
    out: Optional[Path],
    tolerances,
) -> None:
    """Assemble an error bound and report every term."""

    def body() -> None:
        config = ExperimentConfig(
            command=Command.BOUND,
            method=method,
            h=h_name,
            norm3=norm3,
            norm4=norm4,
            n=n,
            fourth_moment=fourth_moment,
            abs3=abs3,
            sigma=sigma,
            cond_var=cond_var,
            sq_diff=sq_diff,
            input=input_path,
            out=out,
            tolerances=tolerances,
        )
        service = BoundService()
        report = service.run(config)
        if out is not None:
            service.results.write_json(out, report)
            service.write_record(config)
        else:
            click.echo(service.results.render_json(report), nl=False)

    run_guarded(body)
