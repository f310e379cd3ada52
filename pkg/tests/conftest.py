import numpy as np
import pytest

from app.models.schemas import ScenarioData, TclParams, TimeSeries, Unit, VbTheta
from app.models.solver import Tolerances


def series(values, period=None, unit=Unit.MW) -> TimeSeries:
    values = np.asarray(values, dtype=float)
    return TimeSeries(values=values, unit=unit, period=period or values.size)


def scenario_from(total_load, price, irradiance, temperature, period) -> ScenarioData:
    return ScenarioData(
        price=series(price, period, Unit.PRICE),
        irradiance=series(irradiance, period, Unit.IRRADIANCE),
        temperature=series(temperature, period, Unit.CELSIUS),
        total_load=series(total_load, period),
    )


@pytest.fixture
def tol() -> Tolerances:
    return Tolerances(tol_feas=1e-9, tol_bind=1e-7, tol_rank=1e-10)


@pytest.fixture
def worked_tcl() -> TclParams:
    """Curve with valid range [21, 23] and g(22) = 0, g(22.75) = 0.5, g(23) = 1."""
    return TclParams(a=1.0, b=1.0, c=-1.0, d=0.0, e=1.0, R=1.0, tau_in=22.0)


@pytest.fixture
def four_slot_price() -> TimeSeries:
    # With theta = (1, 1.5, -0.3) the optimum (1, -1, 0.7, -1) is a nondegenerate vertex.
    return series([1.0, 4.0, 2.0, 3.0], unit=Unit.PRICE)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20220701)


# Under evening_peak_price this theta sits strictly inside one critical region:
# the optimum (1, 0.5, -1, -0.7) binds exactly four rows and F has full rank.
INTERIOR_THETA = VbTheta(p_bar=[1.0], e_bar=[1.5], e_lower=[-0.2])


@pytest.fixture
def evening_peak_price() -> TimeSeries:
    return series([1.0, 2.0, 9.0, 8.0], unit=Unit.PRICE)
