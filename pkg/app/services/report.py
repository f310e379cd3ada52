"""Scoring of identified decompositions and the on-disk results bundle.

Bundle layout (one directory per run):
  scores.csv                 window_id, split, tl, pl, esl, pv, tcl (NRMSE %)
  summary.csv                mean over windows per component, with references
  config.yaml                fully resolved run configuration
  convergence_w{id}.csv      one row per outer iteration
  newton_w{id}.csv           one row per inner iteration, keyed by outer iteration
  trajectories_w{id}.csv     measured and identified series, train and test
  params_w{id}.json          the identified model (theta, lambdas, PL profile)
  *.svg                      a line plot for every CSV above except summary
"""
import logging
from pathlib import Path
from typing import Iterable, Optional, Sequence, Union

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict

from app.core.config import settings
from app.core.errors import MetricError
from app.models.config import RunConfig
from app.models.schemas import Decomposition, ScenarioData
from app.models.solver import Tolerances
from app.services.edci import EdciResult, IdentifiedModel, predict
from app.services.ingest import CONFIG_FILE, dump_config, timestamps
from app.services.metrics import COMPONENTS, ComponentScores, Split, nrmse, summarize

logger = logging.getLogger(__name__)

SCORES_FILE = "scores.csv"
SUMMARY_FILE = "summary.csv"


class WindowOutcome(BaseModel):
    window_id: int
    result: EdciResult
    train: ScenarioData
    test: Optional[ScenarioData] = None
    prediction: Optional[Decomposition] = None
    scores: tuple[ComponentScores, ...] = ()

    model_config = ConfigDict(arbitrary_types_allowed=True)


def score_run(
    result: EdciResult,
    data: ScenarioData,
    split: Split = Split.TRAIN,
    window_id: int = 0,
    truth: Optional[Decomposition] = None,
    estimate: Optional[Decomposition] = None,
    tol: Optional[Tolerances] = None,
) -> ComponentScores:
    """TL against the measured load; components against truth when it is known.

    The training split scores the fitted decomposition, the test split scores
    the identified model applied to the test exogenous data.
    """
    if estimate is None:
        estimate = result.decomposition if split is Split.TRAIN else predict(result, data.exogenous(), tol)
    scores = {"tl": nrmse(data.total_load.values, estimate.total.values)}
    if truth is not None:
        for name, actual in truth.components().items():
            try:
                scores[name] = nrmse(actual.values, estimate.components()[name].values)
            except MetricError:
                logger.warning(f"Window {window_id} {split.value}: true {name.upper()} is identically zero; not scored")
    return ComponentScores(window_id=window_id, split=split, **scores)


def plot_lines(frame: pd.DataFrame, x: str, columns: Sequence[str], path: Path, title: str, logy: bool = False) -> Path:
    fig, ax = plt.subplots(figsize=(9, 4))
    for column in columns:
        ax.plot(frame[x], frame[column], label=column)
    if logy:
        ax.set_yscale("symlog", linthresh=1e-9)
    ax.set_xlabel(x)
    ax.set_title(title)
    ax.legend(loc="best", fontsize="small")
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)
    return path


def write_csv(frame: pd.DataFrame, path: Path) -> Path:
    frame.to_csv(path, index=False, float_format=settings.RESULTS_FLOAT_FORMAT)
    return path


def convergence_frame(result: EdciResult) -> pd.DataFrame:
    return pd.DataFrame([r.model_dump() for r in result.outer_trace])


def newton_frame(result: EdciResult) -> pd.DataFrame:
    frames = []
    for outer, trace in enumerate(result.newton_traces, start=1):
        frame = trace.to_frame()
        frame.insert(0, "outer_iteration", outer)
        frames.append(frame)
    return pd.concat(frames, ignore_index=True) if frames else pd.DataFrame()


def trajectories_frame(outcome: WindowOutcome) -> pd.DataFrame:
    def block(split: Split, data: ScenarioData, fit: Decomposition) -> pd.DataFrame:
        return pd.DataFrame({
            "split": split.value,
            "timestamp": timestamps(data.T, data.period, data.start),
            "total_load": data.total_load.values,
            "fitted_total": fit.total.values,
            **{name: series.values for name, series in fit.components().items()},
        })

    blocks = [block(Split.TRAIN, outcome.train, outcome.result.decomposition)]
    if outcome.test is not None and outcome.prediction is not None:
        blocks.append(block(Split.TEST, outcome.test, outcome.prediction))
    frame = pd.concat(blocks, ignore_index=True)
    frame.insert(1, "index", np.arange(len(frame)))
    return frame


def write_params(model: IdentifiedModel, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.write_text(model.model_dump_json(indent=2))
    return path


def load_model(path: Union[str, Path]) -> IdentifiedModel:
    return IdentifiedModel.model_validate_json(Path(path).read_text())


def emit_bundle(
    outcomes: Iterable[WindowOutcome],
    out_dir: Union[str, Path],
    config: Optional[RunConfig] = None,
) -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    scores: list[ComponentScores] = []

    for outcome in outcomes:
        w = outcome.window_id
        scores.extend(outcome.scores)

        convergence = convergence_frame(outcome.result)
        written.append(write_csv(convergence, out_dir / f"convergence_w{w}.csv"))
        written.append(plot_lines(convergence, "iteration", ["tl_nrmse"], out_dir / f"convergence_w{w}.svg", f"Window {w}: training TL NRMSE (%)"))

        newton = newton_frame(outcome.result)
        written.append(write_csv(newton, out_dir / f"newton_w{w}.csv"))
        if not newton.empty:
            newton = newton.assign(step=np.arange(len(newton)))
            written.append(plot_lines(newton, "step", ["loss"], out_dir / f"newton_w{w}.svg", f"Window {w}: inner loss", logy=True))

        trajectories = trajectories_frame(outcome)
        written.append(write_csv(trajectories, out_dir / f"trajectories_w{w}.csv"))
        written.append(plot_lines(
            trajectories, "index", ["total_load", "fitted_total", *(c for c in COMPONENTS if c != "tl")],
            out_dir / f"trajectories_w{w}.svg", f"Window {w}: load components (MW)",
        ))

        written.append(write_params(outcome.result.model, out_dir / f"params_w{w}.json"))

    frame = pd.DataFrame([s.model_dump(mode="json") for s in scores], columns=["window_id", "split", *COMPONENTS])
    written.append(write_csv(frame, out_dir / SCORES_FILE))
    if scores:
        pivot = frame.pivot(index="window_id", columns="split", values="tl").reset_index()
        written.append(plot_lines(pivot, "window_id", [c for c in ("train", "test") if c in pivot], out_dir / "scores.svg", "TL NRMSE per window (%)"))
        written.append(write_csv(summarize(scores), out_dir / SUMMARY_FILE))

    if config is not None:
        written.append(dump_config(config, out_dir / CONFIG_FILE))
    logger.info(f"Wrote {len(written)} files to {out_dir}")
    return written


def read_scores(out_dir: Union[str, Path]) -> list[ComponentScores]:
    frame = pd.read_csv(Path(out_dir) / SCORES_FILE)
    frame = frame.astype(object).where(frame.notna(), None)
    return [ComponentScores.model_validate(row) for row in frame.to_dict(orient="records")]
