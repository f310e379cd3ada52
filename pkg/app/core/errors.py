from datetime import datetime
from pathlib import Path
from typing import Optional


class EdciError(Exception):
    """Base class for every failure raised by the identification pipeline."""


class SeriesLengthError(EdciError):
    """A series length is not compatible with the requested daily operation."""


class LinearProgramError(EdciError):
    """Malformed linear program or a numerical failure inside the LP backend."""


class InfeasibleDeviceError(EdciError):
    """An ESL device LP has no feasible schedule."""


class TemperatureRangeError(EdciError):
    """Outdoor temperature outside the range where the TCL curve is defined."""

    def __init__(self, value: float, valid: tuple[float, float], index: Optional[int] = None):
        self.value = value
        self.valid = valid
        self.index = index
        where = f" at index {index}" if index is not None else ""
        super().__init__(
            f"Temperature {value:.4g} degC{where} outside valid range "
            f"[{valid[0]:.4g}, {valid[1]:.4g}]"
        )


class ScenarioError(EdciError):
    """A scenario cannot support the requested identification step."""


class WindowError(EdciError):
    """Not enough days for the requested train/test split."""


class MetricError(EdciError):
    """A score cannot be computed (for example a zero normalizer)."""


class ConfigError(EdciError):
    def __init__(self, message: str, field: Optional[str] = None):
        self.field = field
        super().__init__(f"{field}: {message}" if field else message)


class DataFormatError(EdciError):
    def __init__(self, path: Path, message: str, row: Optional[int] = None, column: Optional[str] = None):
        self.path = path
        self.row = row
        self.column = column
        location = ", ".join(
            part for part in (
                f"row {row}" if row is not None else "",
                f"column '{column}'" if column else "",
            ) if part
        )
        super().__init__(f"{path}{' (' + location + ')' if location else ''}: {message}")


class DataGapError(EdciError):
    def __init__(self, path: Path, missing: datetime):
        self.path = path
        self.missing = missing
        super().__init__(f"{path}: missing sample at {missing.isoformat()}")


class DataAlignmentError(EdciError):
    def __init__(self, path: Path, timestamp: datetime):
        self.path = path
        self.timestamp = timestamp
        super().__init__(f"{path}: timestamp {timestamp.isoformat()} does not align with the other signals")
