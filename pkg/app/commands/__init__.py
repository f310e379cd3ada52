from pathlib import Path
from typing import Optional

import click

from app.models.config import RunConfig
from app.models.schemas import Decomposition
from app.services.bench import TRUTH_FILE, load_truth
from app.services.ingest import load_config

config_option = click.option(
    "--config", "config_path", required=True,
    type=click.Path(dir_okay=False, path_type=Path), help="YAML run configuration.",
)
data_dir_option = click.option(
    "--data-dir", type=click.Path(file_okay=False, path_type=Path), default=None,
    help="Directory with the signal CSVs; overrides data.directory.",
)
out_option = click.option(
    "--out", required=True, type=click.Path(file_okay=False, path_type=Path), help="Output directory.",
)
workers_option = click.option(
    "--workers", type=click.IntRange(min=1), default=None, help="Parallel window workers (default EDCI_WORKERS).",
)


def resolve_config(config_path: Path, data_dir: Optional[Path] = None) -> RunConfig:
    config = load_config(config_path)
    return config.with_data_dir(data_dir) if data_dir is not None else config


def find_truth(config: RunConfig) -> Optional[Decomposition]:
    directory = config.data.directory or Path(".")
    if not (directory / TRUTH_FILE).is_file():
        return None
    return load_truth(directory / TRUTH_FILE, config.data.period)


def echo_scores(title: str, scores) -> None:
    parts = [f"{name.upper()} {value:.3f}%" for name, value in scores.items() if value is not None]
    click.echo(f"{title}: " + "  ".join(parts), err=True)
