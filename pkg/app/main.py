from typing import Optional

import click

from app import __version__
from app.core.config import configure_logging, settings
from app.commands import bench, evaluation, identification


@click.group(name="edci", help="Identify environment-dependent components of an aggregate load.")
@click.option("--log-level", default=None, help=f"Logging level (default {settings.LOG_LEVEL}).")
@click.version_option(__version__, prog_name=settings.PROJECT_NAME)
def cli(log_level: Optional[str]):
    configure_logging(log_level)


# Include commands
cli.add_command(bench.generate)
cli.add_command(identification.identify)
cli.add_command(identification.predict)
cli.add_command(evaluation.evaluate)
cli.add_command(evaluation.sweep)

if __name__ == "__main__":
    cli()
