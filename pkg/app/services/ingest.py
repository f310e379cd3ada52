"""CSV and YAML plumbing between the filesystem and the domain types.

Signal files carry a header row and two columns, ``timestamp`` (ISO-8601) and
``value``. A combined file carries ``timestamp`` plus one column per signal.
Timestamps only have to be uniform and aligned; the algorithms work on index
positions.
"""
import logging
from datetime import datetime, timedelta
from pathlib import Path
from typing import Optional, Union

import numpy as np
import pandas as pd
import yaml
from pydantic import ValidationError

from app.core.config import settings
from app.core.errors import ConfigError, DataAlignmentError, DataFormatError, DataGapError
from app.models.config import DataConfig, RunConfig, TemperatureUnit
from app.models.schemas import Exogenous, ScenarioData, TimeSeries, Unit

logger = logging.getLogger(__name__)

EXOGENOUS_SIGNALS = {"price": Unit.PRICE, "irradiance": Unit.IRRADIANCE, "temperature": Unit.CELSIUS}
SIGNAL_UNITS = {**EXOGENOUS_SIGNALS, "total_load": Unit.MW}
DEFAULT_START = datetime(2022, 7, 1)
TIMESTAMP_FORMAT = "%Y-%m-%dT%H:%M:%S"
CONFIG_FILE = "config.yaml"


def load_config(path: Union[str, Path]) -> RunConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file {path} does not exist")
    try:
        raw = yaml.safe_load(path.read_text()) or {}
    except yaml.YAMLError as e:
        raise ConfigError(f"{path} is not valid YAML: {e}")
    if not isinstance(raw, dict):
        raise ConfigError(f"{path} must contain a mapping at the top level")

    try:
        config = RunConfig.model_validate(raw)
    except ValidationError as e:
        first = e.errors()[0]
        field = ".".join(str(part) for part in first["loc"])
        raise ConfigError(first["msg"], field=field or None)

    resolved = config.model_copy(update={"data": config.data.resolve(path.parent)})
    logger.debug(f"Loaded run config from {path}")
    return resolved


def dump_config(config: RunConfig, path: Union[str, Path]) -> Path:
    """Write the fully resolved config (defaults included) as YAML."""
    path = Path(path)
    path.write_text(yaml.safe_dump(config.model_dump(mode="json"), sort_keys=False))
    return path


def _step(period: int) -> timedelta:
    return timedelta(days=1) / period


def _check_cadence(path: Path, stamps: pd.Series, step: timedelta) -> None:
    deltas = stamps.diff().iloc[1:]
    for position, delta in zip(deltas.index, deltas):
        if delta == step:
            continue
        previous = stamps.iloc[position - 1].to_pydatetime()
        if delta > step and delta % step == timedelta(0):
            raise DataGapError(path, previous + step)
        raise DataFormatError(path, f"timestamps must increase in steps of {step}", row=position + 2, column="timestamp")


def _read_frame(path: Path, columns: list[str], step: timedelta) -> pd.DataFrame:
    try:
        frame = pd.read_csv(path, dtype=str)
    except pd.errors.ParserError as e:
        raise DataFormatError(path, f"unparseable CSV: {e}")
    except pd.errors.EmptyDataError:
        raise DataFormatError(path, "file is empty")

    for column in ["timestamp", *columns]:
        if column not in frame.columns:
            raise DataFormatError(path, "required column is missing", column=column)
    if frame.empty:
        raise DataFormatError(path, "file has a header but no rows")

    stamps = pd.to_datetime(frame["timestamp"], errors="coerce", format="ISO8601")
    if stamps.isna().any():
        row = int(np.flatnonzero(stamps.isna().to_numpy())[0])
        raise DataFormatError(path, f"cannot parse timestamp {frame['timestamp'].iloc[row]!r}", row=row + 2, column="timestamp")
    parsed = pd.DataFrame({"timestamp": stamps})
    for column in columns:
        values = pd.to_numeric(frame[column], errors="coerce")
        bad = values.isna() | ~np.isfinite(values.fillna(0).to_numpy())
        if bad.any():
            row = int(np.flatnonzero(bad.to_numpy())[0])
            raise DataFormatError(path, f"cannot parse value {frame[column].iloc[row]!r}", row=row + 2, column=column)
        parsed[column] = values.astype(float)

    _check_cadence(path, parsed["timestamp"], step)
    return parsed


def _align(reference: pd.Series, path: Path, stamps: pd.Series) -> None:
    n = min(len(reference), len(stamps))
    mismatch = np.flatnonzero(reference.iloc[:n].to_numpy() != stamps.iloc[:n].to_numpy())
    if mismatch.size:
        raise DataAlignmentError(path, stamps.iloc[int(mismatch[0])].to_pydatetime())
    if len(stamps) != len(reference):
        longer = stamps if len(stamps) > len(reference) else reference
        raise DataAlignmentError(path, longer.iloc[n].to_pydatetime())


def _read_signals(data: DataConfig, names: list[str]) -> tuple[dict[str, np.ndarray], datetime]:
    step = _step(data.period)
    values: dict[str, np.ndarray] = {}
    if data.combined:
        path = data.path("combined")
        frame = _read_frame(path, names, step)
        values = {name: frame[name].to_numpy() for name in names}
        start = frame["timestamp"].iloc[0].to_pydatetime()
    else:
        reference: Optional[pd.Series] = None
        for name in names:
            path = data.path(name)
            frame = _read_frame(path, ["value"], step)
            if reference is None:
                reference = frame["timestamp"]
            else:
                _align(reference, path, frame["timestamp"])
            values[name] = frame["value"].to_numpy()
        start = reference.iloc[0].to_pydatetime()

    if data.temperature_unit is TemperatureUnit.FAHRENHEIT and "temperature" in values:
        values["temperature"] = (values["temperature"] - 32.0) * 5.0 / 9.0
    return values, start


def load_exogenous(config: Union[RunConfig, DataConfig]) -> Exogenous:
    data = config.data if isinstance(config, RunConfig) else config
    values, start = _read_signals(data, list(EXOGENOUS_SIGNALS))
    series = {name: TimeSeries(values=values[name], unit=unit, period=data.period) for name, unit in EXOGENOUS_SIGNALS.items()}
    logger.info(f"Loaded {len(series['price'])} exogenous samples starting {start.isoformat()}")
    return Exogenous(**series, start=start)


def load_scenario(config: Union[RunConfig, DataConfig]) -> ScenarioData:
    data = config.data if isinstance(config, RunConfig) else config
    values, start = _read_signals(data, list(SIGNAL_UNITS))
    series = {name: TimeSeries(values=values[name], unit=unit, period=data.period) for name, unit in SIGNAL_UNITS.items()}
    scenario = ScenarioData(**series, start=start)
    logger.info(f"Loaded scenario: {scenario.T} samples, {scenario.days} days from {start.isoformat()}")
    return scenario


def timestamps(T: int, period: int, start: Optional[datetime] = None) -> pd.DatetimeIndex:
    return pd.date_range(start=start or DEFAULT_START, periods=T, freq=pd.Timedelta(_step(period)))


def _write_frame(frame: pd.DataFrame, path: Path) -> Path:
    frame.to_csv(path, index=False, float_format=settings.RESULTS_FLOAT_FORMAT, date_format=TIMESTAMP_FORMAT)
    return path


def write_series(path: Union[str, Path], series: TimeSeries, start: Optional[datetime] = None) -> Path:
    frame = pd.DataFrame({"timestamp": timestamps(len(series), series.period, start), "value": series.values})
    return _write_frame(frame, Path(path))


def write_frame(path: Union[str, Path], columns: dict[str, np.ndarray], period: int, start: Optional[datetime] = None) -> Path:
    """One timestamp column followed by the given equal-length columns."""
    T = len(next(iter(columns.values())))
    frame = pd.DataFrame({"timestamp": timestamps(T, period, start), **columns})
    return _write_frame(frame, Path(path))


def write_scenario(scenario: Union[ScenarioData, Exogenous], directory: Union[str, Path], data: Optional[DataConfig] = None) -> list[Path]:
    """One file per signal under the default (or given) file names; temperature in degC."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    data = data or DataConfig()
    names = list(SIGNAL_UNITS) if isinstance(scenario, ScenarioData) else list(EXOGENOUS_SIGNALS)
    return [write_series(directory / getattr(data, name), getattr(scenario, name), scenario.start) for name in names]
