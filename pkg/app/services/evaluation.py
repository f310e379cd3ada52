import logging
from concurrent.futures import ProcessPoolExecutor
from typing import Iterable, Optional

import numpy as np
import pandas as pd
from tqdm import tqdm

from app.core.config import settings
from app.models.config import RunConfig
from app.models.schemas import Decomposition, ScenarioData
from app.services.bench import window_starts, windows
from app.services.edci import EdciConfig, predict, run_edci
from app.services.metrics import COMPONENTS, Split
from app.services.report import WindowOutcome, score_run

logger = logging.getLogger(__name__)


def identify(
    scenario: ScenarioData,
    cfg: EdciConfig,
    truth: Optional[Decomposition] = None,
    window_id: int = 0,
) -> WindowOutcome:
    """Identify on the whole scenario and score the training fit."""
    result = run_edci(scenario, cfg)
    scores = (score_run(result, scenario, Split.TRAIN, window_id, truth, tol=cfg.inverse.tol),)
    return WindowOutcome(window_id=window_id, result=result, train=scenario, scores=scores)


def evaluate_window(
    window_id: int,
    train: ScenarioData,
    test: ScenarioData,
    cfg: EdciConfig,
    train_truth: Optional[Decomposition] = None,
    test_truth: Optional[Decomposition] = None,
) -> WindowOutcome:
    result = run_edci(train, cfg)
    prediction = predict(result, test.exogenous(), cfg.inverse.tol)
    scores = (
        score_run(result, train, Split.TRAIN, window_id, train_truth),
        score_run(result, test, Split.TEST, window_id, test_truth, estimate=prediction),
    )
    logger.info(
        f"Window {window_id}: TL NRMSE train {scores[0].tl:.3f}% / test {scores[1].tl:.3f}% "
        f"({len(result.outer_trace)} outer iterations, converged={result.converged})"
    )
    return WindowOutcome(window_id=window_id, result=result, train=train, test=test, prediction=prediction, scores=scores)


def _evaluate_job(job: tuple) -> WindowOutcome:
    return evaluate_window(*job)


def evaluate(
    scenario: ScenarioData,
    config: RunConfig,
    truth: Optional[Decomposition] = None,
    workers: Optional[int] = None,
) -> list[WindowOutcome]:
    """Rolling train/test evaluation; window ids are the 1-based start day."""
    w = config.windows
    pairs = windows(scenario, w.train_days, w.test_days, w.stride)
    starts = window_starts(scenario.days, w.train_days, w.test_days, w.stride)
    D = scenario.period

    jobs = []
    for first, (train, test) in zip(starts, pairs):
        train_truth = test_truth = None
        if truth is not None:
            split = (first + w.train_days) * D
            train_truth = truth.slice(first * D, split)
            test_truth = truth.slice(split, split + w.test_days * D)
        jobs.append((first + 1, train, test, config.edci, train_truth, test_truth))

    workers = workers or settings.WORKERS
    logger.info(f"Evaluating {len(jobs)} windows ({w.train_days} train / {w.test_days} test days) with {workers} worker(s)")
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(tqdm(pool.map(_evaluate_job, jobs), total=len(jobs), desc="windows"))
    return [_evaluate_job(job) for job in tqdm(jobs, desc="windows")]


def mean_scores(outcomes: Iterable[WindowOutcome]) -> dict[str, float]:
    """Mean NRMSE per component and split, keyed like 'tl_train'."""
    rows = [s.model_dump(mode="json") for o in outcomes for s in o.scores]
    frame = pd.DataFrame(rows, columns=["window_id", "split", *COMPONENTS])
    means = {}
    for split in Split:
        subset = frame[frame["split"] == split.value]
        for component in COMPONENTS:
            values = subset[component].dropna()
            means[f"{component}_{split.value}"] = float(values.mean()) if len(values) else np.nan
    return means


def sweep(
    scenario: ScenarioData,
    config: RunConfig,
    n_values: Iterable[int],
    truth: Optional[Decomposition] = None,
    workers: Optional[int] = None,
) -> tuple[pd.DataFrame, dict[int, list[WindowOutcome]]]:
    """Repeat the rolling evaluation for each virtual-battery count."""
    rows, outcomes = [], {}
    for n in n_values:
        logger.info(f"Sweep: N = {n}")
        outcomes[n] = evaluate(scenario, config.with_batteries(n), truth, workers)
        rows.append({"n_batteries": n, **mean_scores(outcomes[n])})
    return pd.DataFrame(rows), outcomes
