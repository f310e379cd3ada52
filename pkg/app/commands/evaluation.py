import logging
import re
from pathlib import Path
from typing import Optional

import click

from app.commands import config_option, data_dir_option, find_truth, out_option, resolve_config, workers_option
from app.core.errors import EdciError
from app.services.evaluation import evaluate as evaluate_windows, sweep as sweep_batteries
from app.services.ingest import CONFIG_FILE, dump_config, load_scenario
from app.services.metrics import summarize
from app.services.report import emit_bundle, plot_lines, write_csv

logger = logging.getLogger(__name__)


class BatteryRange(click.ParamType):
    """``N=LOW..HIGH`` or ``N=K``."""
    name = "N=LOW..HIGH"

    def convert(self, value, param, ctx):
        if isinstance(value, list):
            return value
        match = re.fullmatch(r"\s*N\s*=\s*(\d+)\s*(?:\.\.\s*(\d+))?\s*", str(value))
        if not match:
            self.fail(f"{value!r} is not of the form N=LOW..HIGH", param, ctx)
        low = int(match.group(1))
        high = int(match.group(2)) if match.group(2) else low
        if low < 1 or low > high:
            self.fail(f"invalid range {value!r}: need 1 <= LOW <= HIGH", param, ctx)
        return list(range(low, high + 1))


@click.command()
@config_option
@data_dir_option
@out_option
@workers_option
def evaluate(config_path: Path, data_dir: Optional[Path], out: Path, workers: Optional[int]):
    """Rolling train/test evaluation over the whole data set."""
    try:
        config = resolve_config(config_path, data_dir)
        scenario = load_scenario(config)
        outcomes = evaluate_windows(scenario, config, find_truth(config), workers)
        emit_bundle(outcomes, out, config)
    except (EdciError, OSError, ValueError) as e:
        logger.error(f"Error evaluating windows: {e}")
        raise click.ClickException(str(e))

    table = summarize([s for o in outcomes for s in o.scores])
    click.echo(f"Mean NRMSE (%) over {len(outcomes)} windows:", err=True)
    click.echo(table[["component", "train", "test"]].to_string(index=False, float_format="%.3f"), err=True)


@click.command()
@config_option
@data_dir_option
@click.option("--param", "n_values", required=True, type=BatteryRange(), help="Virtual-battery counts, e.g. N=1..8.")
@out_option
@workers_option
def sweep(config_path: Path, data_dir: Optional[Path], n_values: list[int], out: Path, workers: Optional[int]):
    """Repeat the rolling evaluation for a range of virtual-battery counts."""
    try:
        config = resolve_config(config_path, data_dir)
        scenario = load_scenario(config)
        truth = find_truth(config)
        table, outcomes = sweep_batteries(scenario, config, n_values, truth, workers)
        out.mkdir(parents=True, exist_ok=True)
        for n, runs in outcomes.items():
            emit_bundle(runs, out / f"N{n}", config.with_batteries(n))
        write_csv(table, out / "sweep.csv")
        plot_lines(table, "n_batteries", ["tl_train", "tl_test"], out / "sweep.svg", "TL NRMSE vs virtual-battery count (%)")
        dump_config(config, out / CONFIG_FILE)
    except (EdciError, OSError, ValueError) as e:
        logger.error(f"Error sweeping battery counts: {e}")
        raise click.ClickException(str(e))

    click.echo(table[["n_batteries", "tl_train", "tl_test"]].to_string(index=False, float_format="%.3f"), err=True)
