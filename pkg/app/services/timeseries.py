from typing import Sequence

import numpy as np

from app.core.errors import SeriesLengthError
from app.models.schemas import TimeSeries, Unit


def _require_whole_days(length: int, period: int) -> int:
    if length <= 0 or length % period:
        raise SeriesLengthError(f"length {length} is not a positive multiple of the daily period {period}")
    return length // period


def daily_cumulant(series: TimeSeries) -> np.ndarray:
    """Per-day sums: element m is the sum of samples (m-1)D+1 .. mD."""
    days = _require_whole_days(len(series), series.period)
    return series.values.reshape(days, series.period).sum(axis=1)


def periodic_extend(day_profile: Sequence[float], T: int, unit: Unit = Unit.MW) -> TimeSeries:
    profile = np.asarray(day_profile, dtype=float).ravel()
    days = _require_whole_days(T, profile.size)
    return TimeSeries(values=np.tile(profile, days), unit=unit, period=profile.size)


def day_average(series: TimeSeries) -> np.ndarray:
    """Slot-wise mean across days: the orthogonal projection onto D-periodic series, as a day profile."""
    days = _require_whole_days(len(series), series.period)
    return series.values.reshape(days, series.period).mean(axis=0)


def is_periodic(series: TimeSeries, atol: float = 0.0) -> bool:
    days = _require_whole_days(len(series), series.period)
    grid = series.values.reshape(days, series.period)
    return bool(np.all(np.abs(grid - grid[0]) <= atol))


def remove_periodic(series: TimeSeries) -> TimeSeries:
    """The series minus its day-averaged periodic part."""
    return series.with_values(series.values - periodic_extend(day_average(series), len(series)).values)


def periodic_basis(T: int, period: int) -> np.ndarray:
    """T x period indicator matrix: column j selects slot j of every day."""
    days = _require_whole_days(T, period)
    return np.tile(np.eye(period), (days, 1))
