from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from typing import Optional
from datetime import datetime
from pathlib import Path
from enum import Enum

from app.models.schemas import TclParams, Vector
from app.services.edci import EdciConfig


class TemperatureUnit(str, Enum):
    CELSIUS = "degC"
    FAHRENHEIT = "degF"


class DataConfig(BaseModel):
    """Where the hourly signals live. Either one combined file or one file per signal."""
    directory: Optional[Path] = None
    price: str = "price.csv"
    irradiance: str = "irradiance.csv"
    temperature: str = "temperature.csv"
    total_load: str = "total_load.csv"
    combined: Optional[str] = None
    temperature_unit: TemperatureUnit = TemperatureUnit.CELSIUS
    period: int = Field(default=24, ge=1)

    model_config = ConfigDict(extra="forbid", frozen=True)

    def path(self, name: str) -> Path:
        base = self.directory or Path(".")
        return base / getattr(self, name)

    def resolve(self, base: Path) -> "DataConfig":
        if self.directory is None or self.directory.is_absolute():
            return self
        return self.model_copy(update={"directory": base / self.directory})


class WindowConfig(BaseModel):
    train_days: int = Field(default=6, ge=2)
    test_days: int = Field(default=3, ge=1)
    stride: int = Field(default=1, ge=1)

    model_config = ConfigDict(extra="forbid", frozen=True)


class BenchSpec(BaseModel):
    """Synthetic fleet and component ground truth; defaults mirror the July benchmark."""
    n_devices: int = Field(default=50, ge=1)
    device_p_max: float = Field(default=4.0, ge=0)
    # MWh, split symmetrically around the start-of-day energy
    device_e_range: tuple[float, float] = (8.0, 24.0)
    lambda_pv_true: float = -0.04
    lambda_tcl_true: float = 60.0
    tcl_params: TclParams = Field(default_factory=TclParams)
    pl_day_profile: Optional[Vector] = None
    pl_noise_std: float = Field(default=3.0, ge=0)
    seed: int = 0
    daily_cyclic: bool = True
    days: int = Field(default=31, ge=1)
    start: datetime = datetime(2022, 7, 1)

    model_config = ConfigDict(arbitrary_types_allowed=True, extra="forbid", frozen=True)

    @field_validator("device_e_range")
    @classmethod
    def _ordered(cls, value: tuple[float, float]) -> tuple[float, float]:
        low, high = value
        if low < 0 or low > high:
            raise ValueError(f"energy range needs 0 <= low <= high, got {value}")
        return value


class RunConfig(BaseModel):
    data: DataConfig = Field(default_factory=DataConfig)
    edci: EdciConfig = Field(default_factory=EdciConfig)
    windows: WindowConfig = Field(default_factory=WindowConfig)
    bench: Optional[BenchSpec] = None

    model_config = ConfigDict(extra="forbid", frozen=True)

    @model_validator(mode="after")
    def _profile_matches_period(self):
        profile = self.bench.pl_day_profile if self.bench else None
        if profile is not None and profile.size != self.data.period:
            raise ValueError(f"bench.pl_day_profile has {profile.size} entries, data.period is {self.data.period}")
        return self

    def with_data_dir(self, directory: Path) -> "RunConfig":
        return self.model_copy(update={"data": self.data.model_copy(update={"directory": Path(directory)})})

    def with_batteries(self, n_batteries: int) -> "RunConfig":
        return self.model_copy(update={"edci": self.edci.model_copy(update={"n_batteries": n_batteries})})
