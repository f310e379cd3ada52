import numpy as np
import pytest
from pydantic import ValidationError

from app.core.errors import MetricError
from app.services.metrics import COMPONENTS, REFERENCE_NRMSE, ComponentScores, Split, nrmse, summarize


def test_nrmse_worked_value():
    assert nrmse([1.0, 2.0, 3.0, 4.0], [1.0, 2.0, 3.0, 5.0]) == pytest.approx(12.5)


def test_nrmse_identity_and_scale_invariance(rng):
    y = rng.normal(size=20)
    y_hat = y + rng.normal(scale=0.1, size=20)
    assert nrmse(y, y) == 0.0
    assert nrmse(7.5 * y, 7.5 * y_hat) == pytest.approx(nrmse(y, y_hat))


def test_nrmse_undefined_cases():
    with pytest.raises(MetricError):
        nrmse([0.0, 0.0], [1.0, 1.0])
    with pytest.raises(MetricError):
        nrmse([], [])
    with pytest.raises(MetricError):
        nrmse([1.0, 2.0], [1.0])


def test_scores_are_non_negative():
    with pytest.raises(ValidationError):
        ComponentScores(window_id=1, split=Split.TRAIN, tl=-1.0)


def test_summarize_layout():
    scores = [
        ComponentScores(window_id=1, split=Split.TRAIN, tl=2.0, pl=4.0, esl=10.0, pv=5.0, tcl=4.0),
        ComponentScores(window_id=2, split=Split.TRAIN, tl=4.0, pl=6.0, esl=None, pv=5.5, tcl=4.2),
        ComponentScores(window_id=1, split=Split.TEST, tl=30.0),
    ]
    table = summarize(scores)
    assert list(table["component"]) == [c.upper() for c in COMPONENTS]
    assert list(table.columns) == [
        "component", "train", "train_reference", "train_within_band", "test", "test_reference", "test_within_band",
    ]
    tl = table.set_index("component").loc["TL"]
    assert tl["train"] == pytest.approx(3.0)
    assert tl["train_reference"] == REFERENCE_NRMSE["tl"][0]
    assert tl["train_within_band"]
    assert tl["test"] == pytest.approx(30.0)
    assert not tl["test_within_band"]

    esl = table.set_index("component").loc["ESL"]
    assert esl["train"] == pytest.approx(10.0)
    assert np.isnan(esl["test"])
    assert esl["test_within_band"] is None
