import logging
import sys
from typing import Optional, Tuple

import click
import yaml

from app.core.config import settings
from app.core.exceptions import ConfigError, IsacError
from app.schemas.experiment import ExperimentName
from app.schemas.scenario import SystemParameters
from app.services.config_loader import load_config
from app.services.experiments import run

logger = logging.getLogger(__name__)


def _fail(error: IsacError) -> None:
    click.secho(f"Error: {error}", fg="red", err=True)
    sys.exit(2 if isinstance(error, ConfigError) else 1)


@click.group()
@click.option("--log-level", default=None, help="Overrides ISAC_LOG_LEVEL.")
def cli(log_level: Optional[str]):
    """Multi-IRS ISAC simulator and optimizer."""
    logging.basicConfig(
        level=(log_level or settings.LOG_LEVEL).upper(),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )


@cli.command(name="run")
@click.argument("config", type=click.Path(dir_okay=False))
@click.option("--experiment", type=click.Choice([e.value for e in ExperimentName]), default=None)
@click.option("--out", "out", default=None, help="CSV path; defaults to <OUTPUT_DIR>/<experiment>.csv.")
@click.option("--seed", type=int, default=None)
@click.option("--set", "overrides", multiple=True, metavar="KEY=VALUE", help="Dotted override, repeatable.")
@click.option("--workers", type=int, default=None, help="Overrides ISAC_MAX_WORKERS.")
def run_command(config: str, experiment: Optional[str], out: Optional[str], seed: Optional[int],
                overrides: Tuple[str, ...], workers: Optional[int]):
    """Runs an experiment and writes its CSV and metadata sidecar."""
    try:
        spec = load_config(config, overrides, experiment=experiment, seed=seed, output_path=out)
        rows = run(spec, max_workers=workers, show_progress=settings.SHOW_PROGRESS)
    except IsacError as e:
        _fail(e)
        return

    path = out or spec.output_path or f"{settings.OUTPUT_DIR}/{spec.name.value}.csv"
    infeasible = sum(not row.feasible for row in rows)
    click.echo(f"{spec.name.value}: {len(rows)} rows written to {path} ({infeasible} infeasible)")


@cli.command()
@click.argument("config", type=click.Path(dir_okay=False))
@click.option("--set", "overrides", multiple=True, metavar="KEY=VALUE")
def validate(config: str, overrides: Tuple[str, ...]):
    """Checks a configuration file and reports every problem found."""
    try:
        spec = load_config(config, overrides)
    except IsacError as e:
        _fail(e)
        return
    click.secho(
        f"OK: {spec.name.value}, {len(spec.sweep)} sweep points, schemes={[s.value for s in spec.schemes]}",
        fg="green",
    )


@cli.command()
def defaults():
    """Prints the default system parameters as YAML."""
    click.echo(yaml.safe_dump({"system": SystemParameters().model_dump(mode="json", exclude_none=True)},
                              sort_keys=False), nl=False)


if __name__ == "__main__":
    cli()
