import logging
from pathlib import Path
from typing import Optional

import click

from app.commands import config_option, out_option
from app.core.errors import EdciError
from app.services.bench import export_ground_truth, generate as generate_truth, synthetic_exogenous
from app.services.ingest import CONFIG_FILE, dump_config, load_config, load_exogenous

logger = logging.getLogger(__name__)


@click.command()
@config_option
@out_option
@click.option(
    "--exogenous-dir", type=click.Path(file_okay=False, path_type=Path), default=None,
    help="Use measured price/irradiance/temperature CSVs instead of synthetic ones.",
)
def generate(config_path: Path, out: Path, exogenous_dir: Optional[Path]):
    """Write a synthetic benchmark scenario and its true components."""
    try:
        config = load_config(config_path)
    except EdciError as e:
        logger.error(f"Error loading config: {e}")
        raise click.ClickException(str(e))
    if config.bench is None:
        raise click.UsageError(f"{config_path} has no 'bench' section to generate from")

    spec = config.bench
    try:
        if exogenous_dir is not None:
            exogenous = load_exogenous(config.data.model_copy(update={"directory": exogenous_dir}))
        else:
            exogenous = synthetic_exogenous(spec.days, config.data.period, spec.seed, spec.start)
        truth = generate_truth(spec, exogenous, config.edci.inverse.tol)
        written = export_ground_truth(truth, out)
        written.append(dump_config(config, out / CONFIG_FILE))
    except (EdciError, OSError, ValueError) as e:
        logger.error(f"Error generating benchmark: {e}")
        raise click.ClickException(str(e))

    click.echo(
        f"seed={spec.seed} devices={spec.n_devices} p_max={spec.device_p_max} MW "
        f"e_range={spec.device_e_range[0]}..{spec.device_e_range[1]} MWh "
        f"lambda_pv={spec.lambda_pv_true} lambda_tcl={spec.lambda_tcl_true} "
        f"pl_noise_std={spec.pl_noise_std} days={exogenous.days} -> {len(written)} files in {out}",
        err=True,
    )
