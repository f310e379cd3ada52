import logging
from pathlib import Path
from typing import Optional

import click
import pandas as pd

from app.commands import config_option, data_dir_option, echo_scores, find_truth, out_option, resolve_config
from app.core.errors import EdciError
from app.models.config import DataConfig
from app.services.edci import predict as predict_components
from app.services.evaluation import identify as identify_scenario
from app.services.ingest import load_config, load_exogenous, load_scenario, write_frame
from app.services.report import emit_bundle, load_model, plot_lines

logger = logging.getLogger(__name__)


@click.command()
@config_option
@data_dir_option
@out_option
def identify(config_path: Path, data_dir: Optional[Path], out: Path):
    """Identify all four components on the whole data set."""
    try:
        config = resolve_config(config_path, data_dir)
        scenario = load_scenario(config)
        truth = find_truth(config)
        outcome = identify_scenario(scenario, config.edci, truth)
        emit_bundle([outcome], out, config)
    except (EdciError, OSError, ValueError) as e:
        logger.error(f"Error identifying components: {e}")
        raise click.ClickException(str(e))

    result = outcome.result
    click.echo(
        f"{len(result.outer_trace)} outer iterations, converged={result.converged}, "
        f"lambda_pv={result.model.reported_lambda_pv:.6g}, lambda_tcl={result.decomposition.lambda_tcl:.6g}",
        err=True,
    )
    echo_scores("Training NRMSE", outcome.scores[0].model_dump(include={"tl", "pl", "esl", "pv", "tcl"}))


@click.command()
@click.option("--config", "config_path", type=click.Path(dir_okay=False, path_type=Path), default=None,
              help="Optional YAML run configuration (data file names, units, period).")
@click.option("--params-file", required=True, type=click.Path(dir_okay=False, path_type=Path),
              help="params_w{id}.json from an identification bundle.")
@click.option("--exogenous-dir", required=True, type=click.Path(file_okay=False, path_type=Path),
              help="Directory with price, irradiance and temperature CSVs.")
@out_option
def predict(config_path: Optional[Path], params_file: Path, exogenous_dir: Path, out: Path):
    """Apply an identified model to new exogenous data."""
    try:
        data = load_config(config_path).data if config_path is not None else DataConfig()
        exogenous = load_exogenous(data.model_copy(update={"directory": exogenous_dir}))
        model = load_model(params_file)
        components = predict_components(model, exogenous)
        out.mkdir(parents=True, exist_ok=True)
        columns = {name: s.values for name, s in components.components().items()}
        columns["total_load"] = components.total.values
        path = write_frame(out / "prediction.csv", columns, exogenous.period, exogenous.start)
        frame = pd.DataFrame({"index": range(exogenous.T), **columns})
        plot_lines(frame, "index", list(columns), out / "prediction.svg", "Predicted load components (MW)")
    except (EdciError, OSError, ValueError) as e:
        logger.error(f"Error predicting components: {e}")
        raise click.ClickException(str(e))

    click.echo(f"Predicted {exogenous.T} samples -> {path}", err=True)
