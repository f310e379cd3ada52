import logging
from typing import Iterable

import numpy as np

from app.core.errors import InfeasibleDeviceError, SeriesLengthError, TemperatureRangeError
from app.models.schemas import EslDevice, TclParams, TimeSeries, Unit
from app.models.solver import LinearProgram, Tolerances
from app.services.linalg import solve_lp

logger = logging.getLogger(__name__)

# Rounding slack on the discriminant at the edge of the valid range.
_DISC_EPS = 1e-12


def pv_response(lambda_pv: float, irradiance: TimeSeries) -> TimeSeries:
    return TimeSeries(values=lambda_pv * irradiance.values, unit=Unit.MW, period=irradiance.period)


def _discriminant(params: TclParams, tau_out: np.ndarray) -> np.ndarray:
    gap = np.abs(tau_out - params.tau_in)
    return params.d ** 2 - 4 * params.c * params.e + 4 * params.c * gap / params.R


def _g(params: TclParams, disc: np.ndarray) -> np.ndarray:
    root = np.sqrt(np.maximum(disc, 0.0))
    return params.a * (params.d - root) / (-2 * params.c) + params.b


def tcl_g(params: TclParams, tau_out: float) -> float:
    """Steady-state TCL electric power at one outdoor temperature (negative-root branch)."""
    disc = float(_discriminant(params, np.asarray(tau_out, dtype=float)))
    if disc < -_DISC_EPS:
        raise TemperatureRangeError(float(tau_out), params.valid_range())
    return float(_g(params, np.asarray(disc)))


def tcl_curve(params: TclParams, temperature: TimeSeries) -> TimeSeries:
    """g(tau) sample by sample; the unit-capacity TCL regressor."""
    disc = _discriminant(params, temperature.values)
    bad = np.flatnonzero(disc < -_DISC_EPS)
    if bad.size:
        index = int(bad[0])
        raise TemperatureRangeError(float(temperature.values[index]), params.valid_range(), index=index)
    return TimeSeries(values=_g(params, disc), unit=Unit.MW, period=temperature.period)


def tcl_response(lambda_tcl: float, params: TclParams, temperature: TimeSeries) -> TimeSeries:
    curve = tcl_curve(params, temperature)
    return curve.with_values(lambda_tcl * curve.values)


def _device_lp(dev: EslDevice, price: np.ndarray, cyclic: bool) -> LinearProgram:
    T = price.size
    eye = np.eye(T)
    zero = np.zeros((T, T))
    cum = np.tril(np.ones((T, T)))
    ineq_lhs = np.vstack([
        np.hstack([eye, zero]),
        np.hstack([-eye, zero]),
        np.hstack([zero, eye]),
        np.hstack([zero, -eye]),
        np.hstack([cum, -cum]),
        np.hstack([-cum, cum]),
    ])
    ineq_rhs = np.concatenate([
        np.full(T, dev.p_max), np.zeros(T),
        np.full(T, dev.p_max), np.zeros(T),
        np.full(T, dev.e_max), np.full(T, -dev.e_min),
    ])
    eq_lhs = np.hstack([np.ones((1, T)), -np.ones((1, T))]) if cyclic else None
    return LinearProgram(
        cost=np.concatenate([price, -price]),
        ineq_lhs=ineq_lhs,
        ineq_rhs=ineq_rhs,
        eq_lhs=eq_lhs,
        eq_rhs=np.zeros(1) if cyclic else None,
    )


def _dispatch_block(dev: EslDevice, price: np.ndarray, cyclic: bool, tol: Tolerances) -> np.ndarray:
    solution = solve_lp(_device_lp(dev, price, cyclic), tol)
    if not solution.solved:
        raise InfeasibleDeviceError(f"device {dev.model_dump()} has no feasible schedule ({solution.status.value})")
    T = price.size
    return solution.x_opt[:T] - solution.x_opt[T:]


def esl_device_dispatch(dev: EslDevice, price: TimeSeries, tol: Tolerances | None = None) -> TimeSeries:
    """Net consumption of one price-taking storage device over the horizon.

    A daily-cyclic device returns to its start-of-horizon energy at every day
    boundary, so each day is an independent LP over the same bounds.
    """
    tol = tol or Tolerances()
    values = price.values
    if dev.daily_cyclic:
        if len(price) % price.period:
            raise SeriesLengthError(f"daily-cyclic dispatch needs whole days, got {len(price)} samples")
        days = values.reshape(-1, price.period)
        net = np.concatenate([_dispatch_block(dev, day, True, tol) for day in days])
    else:
        net = _dispatch_block(dev, values, False, tol)
    return TimeSeries(values=net, unit=Unit.MW, period=price.period)


def fleet_dispatch(devices: Iterable[EslDevice], price: TimeSeries, tol: Tolerances | None = None) -> TimeSeries:
    total = np.zeros(len(price))
    count = 0
    for dev in devices:
        total += esl_device_dispatch(dev, price, tol).values
        count += 1
    logger.debug(f"Dispatched {count} ESL devices over {len(price)} samples")
    return TimeSeries(values=total, unit=Unit.MW, period=price.period)


def dispatch_cost(price: TimeSeries, net: TimeSeries) -> float:
    return float(price.values @ net.values)
