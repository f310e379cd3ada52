import logging
from enum import Enum
from typing import Iterable, Optional

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field

from app.core.errors import MetricError

logger = logging.getLogger(__name__)

COMPONENTS = ("tl", "pl", "esl", "pv", "tcl")

# Reference averages over the July rolling windows (train, test), in percent.
REFERENCE_NRMSE = {
    "tl": (3.05, 4.03),
    "pl": (4.68, 4.63),
    "esl": (9.13, 14.98),
    "pv": (5.25, 5.26),
    "tcl": (4.14, 4.04),
}
REFERENCE_BAND = 5.0


class Split(str, Enum):
    TRAIN = "train"
    TEST = "test"


class ComponentScores(BaseModel):
    """NRMSE per component in percent; None where no reference series exists."""
    window_id: int
    split: Split
    tl: float = Field(ge=0)
    pl: Optional[float] = Field(default=None, ge=0)
    esl: Optional[float] = Field(default=None, ge=0)
    pv: Optional[float] = Field(default=None, ge=0)
    tcl: Optional[float] = Field(default=None, ge=0)


def nrmse(actual: Iterable[float], estimated: Iterable[float]) -> float:
    """100 * RMSE / max|actual|."""
    y = np.asarray(list(actual) if not isinstance(actual, np.ndarray) else actual, dtype=float)
    y_hat = np.asarray(list(estimated) if not isinstance(estimated, np.ndarray) else estimated, dtype=float)
    if y.size == 0 or y.shape != y_hat.shape:
        raise MetricError(f"nrmse needs two equal, non-empty vectors (got {y.shape} and {y_hat.shape})")
    scale = float(np.max(np.abs(y)))
    if scale == 0.0:
        raise MetricError("nrmse is undefined when the actual series is identically zero")
    return 100.0 * float(np.sqrt(np.mean((y_hat - y) ** 2))) / scale


def summarize(scores: Iterable[ComponentScores]) -> pd.DataFrame:
    """Mean over windows: one row per component, train and test columns.

    Reference values and whether each mean falls within the soft band are
    carried alongside.
    """
    frame = pd.DataFrame([s.model_dump(mode="json") for s in scores], columns=["window_id", "split", *COMPONENTS])
    rows = []
    for component in COMPONENTS:
        row = {"component": component.upper()}
        for position, split in enumerate(Split):
            values = frame.loc[frame["split"] == split.value, component].dropna()
            mean = float(values.mean()) if len(values) else np.nan
            reference = REFERENCE_NRMSE[component][position]
            row[split.value] = mean
            row[f"{split.value}_reference"] = reference
            row[f"{split.value}_within_band"] = bool(abs(mean - reference) <= REFERENCE_BAND) if len(values) else None
        rows.append(row)
    return pd.DataFrame(rows)
