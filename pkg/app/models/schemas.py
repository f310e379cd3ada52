from pydantic import BaseModel, BeforeValidator, ConfigDict, Field, PlainSerializer, field_validator, model_validator
from typing import Annotated, Any, Optional
from datetime import datetime
from enum import Enum
import math

import numpy as np


def _as_vector(value: Any) -> np.ndarray:
    array = np.array(value, dtype=float)
    if array.ndim != 1:
        raise ValueError(f"expected a one-dimensional array, got shape {array.shape}")
    array.setflags(write=False)
    return array


def _as_matrix(value: Any) -> np.ndarray:
    array = np.array(value, dtype=float)
    if array.ndim == 1 and array.size == 0:
        array = array.reshape(0, 0)
    if array.ndim != 2:
        raise ValueError(f"expected a two-dimensional array, got shape {array.shape}")
    array.setflags(write=False)
    return array


# Read-only float arrays that serialize as plain lists.
Vector = Annotated[np.ndarray, BeforeValidator(_as_vector), PlainSerializer(lambda a: a.tolist(), return_type=list)]
Matrix = Annotated[np.ndarray, BeforeValidator(_as_matrix), PlainSerializer(lambda a: a.tolist(), return_type=list)]


class Unit(str, Enum):
    MW = "MW"
    PRICE = "$/MWh"
    IRRADIANCE = "W/m2"
    CELSIUS = "degC"


class PvSign(str, Enum):
    """How the PV coefficient is reported; the fit itself always treats PV as consumption."""
    CONSUMPTION_NEGATIVE = "consumption_negative"
    GENERATION_POSITIVE = "generation_positive"

    def report(self, lambda_pv: float) -> float:
        return -lambda_pv if self is PvSign.GENERATION_POSITIVE else lambda_pv


class TimeSeries(BaseModel):
    values: Vector
    unit: Unit = Unit.MW
    period: int = Field(default=24, ge=1)

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    @field_validator("values")
    @classmethod
    def _finite(cls, values: np.ndarray) -> np.ndarray:
        if values.size == 0:
            raise ValueError("a series needs at least one sample")
        if not np.all(np.isfinite(values)):
            bad = int(np.flatnonzero(~np.isfinite(values))[0])
            raise ValueError(f"non-finite value at index {bad}")
        return values

    def __len__(self) -> int:
        return int(self.values.size)

    @property
    def days(self) -> int:
        return len(self) // self.period

    def with_values(self, values: Any) -> "TimeSeries":
        return TimeSeries(values=values, unit=self.unit, period=self.period)

    def slice(self, start: int, stop: int) -> "TimeSeries":
        return self.with_values(self.values[start:stop])


class Exogenous(BaseModel):
    """Environmental drivers of the behind-the-meter components."""
    price: TimeSeries
    irradiance: TimeSeries
    temperature: TimeSeries
    start: Optional[datetime] = None

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    def _signals(self) -> dict[str, TimeSeries]:
        return {"price": self.price, "irradiance": self.irradiance, "temperature": self.temperature}

    @model_validator(mode="after")
    def _aligned(self):
        signals = self._signals()
        lengths = {name: len(s) for name, s in signals.items()}
        periods = {name: s.period for name, s in signals.items()}
        if len(set(lengths.values())) != 1:
            raise ValueError(f"series lengths differ: {lengths}")
        if len(set(periods.values())) != 1:
            raise ValueError(f"series periods differ: {periods}")
        return self

    @property
    def T(self) -> int:
        return len(self.price)

    @property
    def period(self) -> int:
        return self.price.period

    @property
    def days(self) -> int:
        return self.T // self.period


class ScenarioData(Exogenous):
    total_load: TimeSeries

    def _signals(self) -> dict[str, TimeSeries]:
        return {**super()._signals(), "total_load": self.total_load}

    def exogenous(self) -> Exogenous:
        return Exogenous(price=self.price, irradiance=self.irradiance, temperature=self.temperature, start=self.start)


class VbTheta(BaseModel):
    """Virtual-battery fleet parameters; energies are relative to a zero start-of-horizon datum."""
    p_bar: Vector
    e_bar: Vector
    e_lower: Vector

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    @model_validator(mode="after")
    def _feasible(self):
        n = self.p_bar.size
        if n == 0 or self.e_bar.size != n or self.e_lower.size != n:
            raise ValueError("p_bar, e_bar and e_lower need the same non-zero length")
        if np.any(self.p_bar < 0) or np.any(self.e_bar < 0) or np.any(self.e_lower > 0):
            raise ValueError("theta requires p_bar >= 0 and e_lower <= 0 <= e_bar")
        return self

    @property
    def n_batteries(self) -> int:
        return int(self.p_bar.size)

    def to_vector(self) -> np.ndarray:
        """Interleaved (p_bar_n, e_bar_n, e_lower_n) for n = 1..N."""
        return np.column_stack([self.p_bar, self.e_bar, self.e_lower]).ravel()

    @classmethod
    def from_vector(cls, vector: Any, project: bool = True) -> "VbTheta":
        rows = np.asarray(vector, dtype=float).reshape(-1, 3)
        p_bar, e_bar, e_lower = rows[:, 0], rows[:, 1], rows[:, 2]
        if project:
            p_bar = np.maximum(p_bar, 0.0)
            e_bar = np.maximum(e_bar, 0.0)
            e_lower = np.minimum(e_lower, 0.0)
        return cls(p_bar=p_bar, e_bar=e_bar, e_lower=e_lower)

    @classmethod
    def zeros(cls, n_batteries: int) -> "VbTheta":
        return cls.from_vector(np.zeros(3 * n_batteries))

    def rows(self) -> list[tuple[float, float, float]]:
        return [(float(p), float(u), float(l)) for p, u, l in zip(self.p_bar, self.e_bar, self.e_lower)]


class Decomposition(BaseModel):
    esl: TimeSeries
    pv: TimeSeries
    tcl: TimeSeries
    pl: TimeSeries
    lambda_pv: Optional[float] = None
    lambda_tcl: Optional[float] = None
    theta: Optional[VbTheta] = None

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    @model_validator(mode="after")
    def _same_length(self):
        lengths = {len(self.esl), len(self.pv), len(self.tcl), len(self.pl)}
        if len(lengths) != 1:
            raise ValueError("component series must share one length")
        return self

    @property
    def total(self) -> TimeSeries:
        return self.pl.with_values(self.esl.values + self.pv.values + self.tcl.values + self.pl.values)

    def components(self) -> dict[str, TimeSeries]:
        return {"esl": self.esl, "pv": self.pv, "tcl": self.tcl, "pl": self.pl}

    def slice(self, start: int, stop: int) -> "Decomposition":
        return self.model_copy(update={name: s.slice(start, stop) for name, s in self.components().items()})


class TclParams(BaseModel):
    """Compressor-frequency TCL curve; defaults are the benchmark cooling fleet."""
    a: float = 0.1
    b: float = 0.0
    c: float = -0.01
    d: float = 1.0
    e: float = 0.0
    R: float = 1.0
    C_th: float = 1.0
    tau_in: float = 22.0

    model_config = ConfigDict(frozen=True)

    @model_validator(mode="after")
    def _physical(self):
        if not self.c < 0:
            raise ValueError("quadratic coefficient c must be negative")
        if not self.R > 0:
            raise ValueError("thermal resistance R must be positive")
        if self.d ** 2 - 4 * self.c * self.e < 0:
            raise ValueError("the TCL curve is undefined even at the indoor setpoint")
        return self

    def max_gap(self) -> float:
        return (self.d ** 2 - 4 * self.c * self.e) * self.R / (-4 * self.c)

    def valid_range(self) -> tuple[float, float]:
        gap = self.max_gap()
        return self.tau_in - gap, self.tau_in + gap


class EslDevice(BaseModel):
    p_max: float = Field(ge=0)
    e_max: float = Field(ge=0)
    e_min: float = Field(le=0)
    daily_cyclic: bool = True

    model_config = ConfigDict(frozen=True)

    @field_validator("p_max", "e_max", "e_min")
    @classmethod
    def _finite(cls, value: float) -> float:
        if not math.isfinite(value):
            raise ValueError("device limits must be finite")
        return value
