"""Synthetic ground truth: a heterogeneous storage fleet, PV, TCL and a noisy periodic load."""
import logging
from datetime import datetime, timedelta
from pathlib import Path
from typing import Optional, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, model_validator

from app.core.config import settings
from app.core.errors import DataFormatError, SeriesLengthError, WindowError
from app.models.config import BenchSpec
from app.models.schemas import Decomposition, EslDevice, Exogenous, ScenarioData, TimeSeries, Unit
from app.models.solver import Tolerances
from app.services.ingest import DEFAULT_START, write_frame, write_scenario
from app.services.physics import dispatch_cost, fleet_dispatch, pv_response, tcl_response
from app.services.timeseries import periodic_extend

logger = logging.getLogger(__name__)

TRUTH_FILE = "truth.csv"
DEVICES_FILE = "devices.csv"


class GroundTruth(BaseModel):
    scenario: ScenarioData
    components: Decomposition
    devices: list[EslDevice]

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    @model_validator(mode="after")
    def _accounting(self):
        if not np.array_equal(self.components.total.values, self.scenario.total_load.values):
            raise ValueError("total load must equal the sum of the true components")
        return self


def default_pl_profile(period: int = 24) -> np.ndarray:
    """Base load with a morning shoulder and an evening peak, in MW."""
    hour = np.arange(period) * 24.0 / period
    return 220.0 + 35.0 * np.exp(-((hour - 9.0) / 2.5) ** 2) + 60.0 * np.exp(-((hour - 19.0) / 3.0) ** 2)


def synthetic_exogenous(
    days: int = 31,
    period: int = 24,
    seed: int = 0,
    start: Optional[datetime] = None,
) -> Exogenous:
    """Summer-shaped day-ahead price, irradiance and dry-bulb temperature.

    Price has morning and evening peaks with a drifting daily level; irradiance
    is a clear-sky arc attenuated by per-day and per-hour cloud cover;
    temperature is a diurnal sinusoid around a per-day mean.
    """
    rng = np.random.default_rng(seed)
    T = days * period
    hour = (np.arange(T) % period) * 24.0 / period
    day = np.arange(T) // period

    level = 40.0 + np.cumsum(rng.normal(0.0, 3.0, days))
    shape = 12.0 * np.exp(-((hour - 8.0) / 2.0) ** 2) + 30.0 * np.exp(-((hour - 18.0) / 2.5) ** 2)
    price = np.maximum(level[day] + shape + rng.normal(0.0, 2.0, T), 1.0)

    arc = np.clip(np.sin(np.pi * (hour - 5.5) / 14.0), 0.0, None) ** 1.2
    clouds = rng.uniform(0.55, 1.0, days)[day] * (1.0 - 0.25 * rng.random(T))
    irradiance = 950.0 * arc * clouds

    mean = 26.0 + rng.normal(0.0, 1.5, days)
    temperature = mean[day] + 5.0 * np.sin(2 * np.pi * (hour - 9.0) / 24.0) + rng.normal(0.0, 0.3, T)

    return Exogenous(
        price=TimeSeries(values=price, unit=Unit.PRICE, period=period),
        irradiance=TimeSeries(values=irradiance, unit=Unit.IRRADIANCE, period=period),
        temperature=TimeSeries(values=temperature, unit=Unit.CELSIUS, period=period),
        start=start or DEFAULT_START,
    )


def generate(spec: BenchSpec, exogenous: Exogenous, tol: Optional[Tolerances] = None) -> GroundTruth:
    rng = np.random.default_rng(spec.seed)
    T, period = exogenous.T, exogenous.period
    low, high = spec.device_e_range
    energies = rng.uniform(low, high, spec.n_devices)
    devices = [
        EslDevice(p_max=spec.device_p_max, e_max=e / 2, e_min=-e / 2, daily_cyclic=spec.daily_cyclic)
        for e in energies
    ]
    logger.info(f"Dispatching {len(devices)} ESL devices over {T} samples (seed {spec.seed})")
    esl = fleet_dispatch(devices, exogenous.price, tol)
    logger.info(f"ESL fleet arbitrage cost over the horizon: {dispatch_cost(exogenous.price, esl):.6g}")

    profile = spec.pl_day_profile if spec.pl_day_profile is not None else default_pl_profile(period)
    if len(profile) != period:
        raise SeriesLengthError(f"PL day profile has {len(profile)} entries, period is {period}")
    pl = periodic_extend(profile, T).values
    if spec.pl_noise_std > 0:
        pl = pl + rng.normal(0.0, spec.pl_noise_std, T)

    components = Decomposition(
        esl=esl,
        pv=pv_response(spec.lambda_pv_true, exogenous.irradiance),
        tcl=tcl_response(spec.lambda_tcl_true, spec.tcl_params, exogenous.temperature),
        pl=TimeSeries(values=pl, unit=Unit.MW, period=period),
        lambda_pv=spec.lambda_pv_true,
        lambda_tcl=spec.lambda_tcl_true,
    )
    scenario = ScenarioData(
        price=exogenous.price,
        irradiance=exogenous.irradiance,
        temperature=exogenous.temperature,
        total_load=components.total,
        start=exogenous.start,
    )
    return GroundTruth(scenario=scenario, components=components, devices=devices)


def slice_days(scenario: ScenarioData, first_day: int, n_days: int) -> ScenarioData:
    D = scenario.period
    start, stop = first_day * D, (first_day + n_days) * D
    return ScenarioData(
        price=scenario.price.slice(start, stop),
        irradiance=scenario.irradiance.slice(start, stop),
        temperature=scenario.temperature.slice(start, stop),
        total_load=scenario.total_load.slice(start, stop),
        start=scenario.start + timedelta(days=first_day) if scenario.start else None,
    )


def window_starts(days: int, train_days: int, test_days: int, stride: int = 1) -> list[int]:
    if train_days < 1 or test_days < 1 or stride < 1:
        raise WindowError("train_days, test_days and stride must be positive")
    span = train_days + test_days
    if span > days:
        raise WindowError(f"{train_days}+{test_days} days requested, only {days} available")
    return list(range(0, days - span + 1, stride))


def windows(
    scenario: ScenarioData,
    train_days: int,
    test_days: int,
    stride: int = 1,
) -> list[tuple[ScenarioData, ScenarioData]]:
    """Rolling (train, test) pairs; window i starts on day i and covers train_days + test_days days."""
    if scenario.T % scenario.period:
        raise SeriesLengthError(f"{scenario.T} samples is not a whole number of days")
    return [
        (slice_days(scenario, first, train_days), slice_days(scenario, first + train_days, test_days))
        for first in window_starts(scenario.days, train_days, test_days, stride)
    ]


def export_ground_truth(truth: GroundTruth, out_dir: Union[str, Path]) -> list[Path]:
    out_dir = Path(out_dir)
    written = write_scenario(truth.scenario, out_dir)
    c = truth.components
    written.append(write_frame(
        out_dir / TRUTH_FILE,
        {"esl": c.esl.values, "pv": c.pv.values, "tcl": c.tcl.values, "pl": c.pl.values, "total_load": c.total.values},
        truth.scenario.period,
        truth.scenario.start,
    ))
    devices = pd.DataFrame([{"device": i, **d.model_dump()} for i, d in enumerate(truth.devices)])
    devices.to_csv(out_dir / DEVICES_FILE, index=False, float_format=settings.RESULTS_FLOAT_FORMAT)
    written.append(out_dir / DEVICES_FILE)
    logger.info(f"Wrote ground truth for {truth.scenario.T} samples to {out_dir}")
    return written


def load_truth(path: Union[str, Path], period: int = 24) -> Decomposition:
    """Read the true component series back; coefficients are not part of the file."""
    path = Path(path)
    if path.is_dir():
        path = path / TRUTH_FILE
    frame = pd.read_csv(path)
    missing = [c for c in ("esl", "pv", "tcl", "pl") if c not in frame.columns]
    if missing:
        raise DataFormatError(path, "required column is missing", column=missing[0])
    series = {name: TimeSeries(values=frame[name].to_numpy(dtype=float), unit=Unit.MW, period=period) for name in ("esl", "pv", "tcl", "pl")}
    return Decomposition(**series)
