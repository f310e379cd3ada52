"""Double-layer identification of the four environment-dependent load components.

Outer loop: storage-like parameters via inverse Newton, then the PV and TCL
coefficients by least squares, then the periodic load as the day-averaged
residual, until successive PL estimates agree to within conv_tol.

The projected scheme fits theta against the part of the total load that PV,
TCL and any periodic profile cannot explain, then refits PV, TCL and PL
jointly; the alternating scheme holds the previous PL fixed during the refit.
"""
import logging
from enum import Enum
from typing import NamedTuple, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, computed_field

from app.core.errors import MetricError, ScenarioError, SeriesLengthError
from app.models.schemas import Decomposition, Exogenous, PvSign, ScenarioData, TclParams, TimeSeries, Unit, VbTheta, Vector
from app.models.solver import Projector, Tolerances
from app.services.inverse import InverseConfig, NewtonTrace, esl_target, identify_esl
from app.services.linalg import least_squares, residual_projector
from app.services.metrics import nrmse
from app.services.physics import pv_response, tcl_curve, tcl_response
from app.services.surrogate import vb_response
from app.services.timeseries import daily_cumulant, day_average, is_periodic, periodic_basis, periodic_extend, remove_periodic

logger = logging.getLogger(__name__)


class OuterScheme(str, Enum):
    ALTERNATING = "alternating"
    PROJECTED = "projected"


class EdciConfig(BaseModel):
    outer_max: int = Field(default=20, ge=1)
    conv_tol: float = Field(default=1e-3, gt=0)
    n_batteries: int = Field(default=3, ge=1)
    scheme: OuterScheme = OuterScheme.PROJECTED
    # Virtual batteries return to their start-of-day energy, like the ESL devices.
    daily_cyclic: bool = True
    inverse: InverseConfig = Field(default_factory=InverseConfig)
    tcl_params: TclParams = Field(default_factory=TclParams)
    pv_sign: PvSign = PvSign.CONSUMPTION_NEGATIVE

    model_config = ConfigDict(frozen=True)

    def inverse_config(self) -> InverseConfig:
        return self.inverse.model_copy(update={"daily_cyclic": self.daily_cyclic})


class InitEstimate(BaseModel):
    lambda_dc_pv: float
    lambda_dc_tcl: float
    sigma_dc_pl: float
    rank_deficient: bool = False


class OuterRecord(BaseModel):
    iteration: int
    lambda_pv: float
    lambda_tcl: float
    loss_o: float
    esl_loss: float
    pl_change: float
    tl_nrmse: float
    accepted: bool = True


class IdentifiedModel(BaseModel):
    """Everything needed to predict the components on new exogenous data."""
    theta: VbTheta
    lambda_pv: float
    lambda_tcl: float
    pl_profile: Vector
    tcl_params: TclParams
    pv_sign: PvSign = PvSign.CONSUMPTION_NEGATIVE
    daily_cyclic: bool = False

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    @property
    def period(self) -> int:
        return int(self.pl_profile.size)

    @computed_field
    @property
    def reported_lambda_pv(self) -> float:
        return self.pv_sign.report(self.lambda_pv)


class EdciResult(BaseModel):
    decomposition: Decomposition
    init: InitEstimate
    outer_trace: list[OuterRecord]
    newton_traces: list[NewtonTrace]
    converged: bool
    tcl_params: TclParams
    pv_sign: PvSign = PvSign.CONSUMPTION_NEGATIVE
    daily_cyclic: bool = False

    model_config = ConfigDict(arbitrary_types_allowed=True)

    @property
    def model(self) -> IdentifiedModel:
        d = self.decomposition
        return IdentifiedModel(
            theta=d.theta,
            lambda_pv=d.lambda_pv,
            lambda_tcl=d.lambda_tcl,
            pl_profile=d.pl.values[:d.pl.period],
            tcl_params=self.tcl_params,
            pv_sign=self.pv_sign,
            daily_cyclic=self.daily_cyclic,
        )


class Refit(NamedTuple):
    lambda_pv: float
    lambda_tcl: float
    loss: float
    rank_deficient: bool


def initialize(scenario: ScenarioData, tcl_params: TclParams, tol: Optional[Tolerances] = None) -> InitEstimate:
    """Fit daily sums: storage-like load nets to zero per day, periodic load is a constant per day."""
    tol = tol or Tolerances()
    if scenario.T % scenario.period:
        raise SeriesLengthError(f"{scenario.T} samples is not a whole number of {scenario.period}-sample days")
    if scenario.days < 2:
        raise ScenarioError(f"initialization needs at least 2 full days, got {scenario.days}")
    for name, signal in (("irradiance", scenario.irradiance), ("temperature", scenario.temperature)):
        scale = float(np.abs(signal.values).max())
        if is_periodic(signal, atol=1e-6 * max(scale, 1.0)):
            logger.warning(f"{name} repeats every day; its component cannot be told apart from the periodic load")

    tl_dc = daily_cumulant(scenario.total_load)
    design = np.column_stack([
        daily_cumulant(scenario.irradiance),
        daily_cumulant(tcl_curve(tcl_params, scenario.temperature)),
        np.ones(scenario.days),
    ])
    solution = least_squares(design, tl_dc, tol.tol_rank)
    if solution.rank_deficient:
        logger.warning(f"Daily-cumulant regression has rank {solution.rank} < 3; using minimum-norm estimate")
    lambda_pv, lambda_tcl, sigma = (float(v) for v in solution.x)
    logger.info(f"Initial estimate: lambda_pv={lambda_pv:.6g}, lambda_tcl={lambda_tcl:.6g}, sigma_pl={sigma:.6g} MWh/day")
    return InitEstimate(lambda_dc_pv=lambda_pv, lambda_dc_tcl=lambda_tcl, sigma_dc_pl=sigma, rank_deficient=solution.rank_deficient)


def joint_projector(scenario: ScenarioData, tcl_params: TclParams, tol: Optional[Tolerances] = None) -> Projector:
    """Removes everything PV, TCL and a periodic profile can explain."""
    tol = tol or Tolerances()
    columns = np.column_stack([
        periodic_basis(scenario.T, scenario.period),
        scenario.irradiance.values,
        tcl_curve(tcl_params, scenario.temperature).values,
    ])
    return residual_projector(columns, tol.tol_rank)


def refit_pv_tcl(
    scenario: ScenarioData,
    esl: TimeSeries,
    pl_prev: Optional[TimeSeries],
    tcl_params: TclParams,
    tol: Optional[Tolerances] = None,
) -> Refit:
    """Least-squares PV and TCL coefficients.

    With pl_prev the previous PL is held fixed. Without it the PL profile is
    fitted jointly: both sides lose their periodic part first, and the
    remaining day profile follows from update_pl.
    """
    tol = tol or Tolerances()
    if len(esl) != scenario.T or (pl_prev is not None and len(pl_prev) != scenario.T):
        raise SeriesLengthError("ESL and PL series must match the scenario length")
    irradiance = scenario.irradiance
    curve = tcl_curve(tcl_params, scenario.temperature)
    residual = scenario.total_load.with_values(scenario.total_load.values - esl.values)
    if pl_prev is None:
        irradiance, curve, residual = remove_periodic(irradiance), remove_periodic(curve), remove_periodic(residual)
    else:
        residual = residual.with_values(residual.values - pl_prev.values)
    design = np.column_stack([irradiance.values, curve.values])
    solution = least_squares(design, residual.values, tol.tol_rank)
    if solution.rank_deficient:
        logger.warning("PV and TCL regressors are collinear or absent; using minimum-norm coefficients")
    lambda_pv, lambda_tcl = (float(v) for v in solution.x)
    loss = float(np.linalg.norm(design @ solution.x - residual.values))
    return Refit(lambda_pv, lambda_tcl, loss, solution.rank_deficient)


def pl_residual(
    scenario: ScenarioData,
    esl: TimeSeries,
    lambda_pv: float,
    lambda_tcl: float,
    tcl_params: TclParams,
) -> TimeSeries:
    """Total load minus the other three components, before the periodicity projection."""
    pv = pv_response(lambda_pv, scenario.irradiance).values
    tcl = tcl_response(lambda_tcl, tcl_params, scenario.temperature).values
    return scenario.total_load.with_values(scenario.total_load.values - esl.values - pv - tcl)


def update_pl(
    scenario: ScenarioData,
    esl: TimeSeries,
    lambda_pv: float,
    lambda_tcl: float,
    tcl_params: TclParams,
) -> TimeSeries:
    residual = pl_residual(scenario, esl, lambda_pv, lambda_tcl, tcl_params)
    return periodic_extend(day_average(residual), scenario.T)


def pl_change_ratio(pl_new: TimeSeries, pl_old: TimeSeries) -> float:
    denominator = float(np.linalg.norm(pl_new.values))
    difference = float(np.linalg.norm(pl_new.values - pl_old.values))
    if denominator == 0.0:
        return 0.0 if float(np.linalg.norm(pl_old.values)) == 0.0 else np.inf
    return difference / denominator


def converged(pl_new: TimeSeries, pl_old: TimeSeries, nu: float) -> bool:
    if len(pl_new) != len(pl_old):
        raise SeriesLengthError("PL estimates differ in length")
    return pl_change_ratio(pl_new, pl_old) <= nu


def _fit_error(actual: TimeSeries, fitted: TimeSeries) -> float:
    try:
        return nrmse(actual.values, fitted.values)
    except MetricError:
        return float(np.sqrt(np.mean((actual.values - fitted.values) ** 2)))


def run_edci(scenario: ScenarioData, cfg: Optional[EdciConfig] = None) -> EdciResult:
    cfg = cfg or EdciConfig()
    tcl_params = cfg.tcl_params
    inverse = cfg.inverse_config()
    tol = inverse.tol
    init = initialize(scenario, tcl_params, tol)
    projector = joint_projector(scenario, tcl_params, tol) if cfg.scheme is OuterScheme.PROJECTED else None

    lambda_pv, lambda_tcl = init.lambda_dc_pv, init.lambda_dc_tcl
    pl = periodic_extend(np.full(scenario.period, init.sigma_dc_pl / scenario.period), scenario.T)
    theta: Optional[VbTheta] = None
    best: Optional[tuple[Decomposition, float]] = None
    outer: list[OuterRecord] = []
    traces: list[NewtonTrace] = []
    is_converged = False

    for iteration in range(1, cfg.outer_max + 1):
        target = esl_target(scenario, lambda_pv, lambda_tcl, pl, tcl_params)
        identification = identify_esl(
            target, scenario.price, cfg.n_batteries, inverse, theta0=theta, projector=projector,
        )
        traces.append(identification.trace)
        esl = identification.response.esl_total

        refit = refit_pv_tcl(scenario, esl, pl if projector is None else None, tcl_params, tol)
        pl_new = update_pl(scenario, esl, refit.lambda_pv, refit.lambda_tcl, tcl_params)
        decomposition = Decomposition(
            esl=esl,
            pv=pv_response(refit.lambda_pv, scenario.irradiance),
            tcl=tcl_response(refit.lambda_tcl, tcl_params, scenario.temperature),
            pl=pl_new,
            lambda_pv=refit.lambda_pv,
            lambda_tcl=refit.lambda_tcl,
            theta=identification.theta,
        )
        error = _fit_error(scenario.total_load, decomposition.total)
        ratio = pl_change_ratio(pl_new, pl)
        record = OuterRecord(
            iteration=iteration,
            lambda_pv=refit.lambda_pv,
            lambda_tcl=refit.lambda_tcl,
            loss_o=refit.loss,
            esl_loss=identification.loss,
            pl_change=ratio,
            tl_nrmse=error,
        )

        if best is not None and error > best[1] * (1 + 1e-9) + 1e-12:
            outer.append(record.model_copy(update={"accepted": False}))
            logger.warning(
                f"Outer iteration {iteration} raised the training error ({best[1]:.4f}% -> {error:.4f}%); "
                "keeping the previous iterate"
            )
            break

        outer.append(record)
        logger.info(
            f"Outer iteration {iteration}: lambda_pv={refit.lambda_pv:.6g}, lambda_tcl={refit.lambda_tcl:.6g}, "
            f"loss_o={refit.loss:.6g}, PL change={ratio:.3e}, TL NRMSE={error:.4f}%"
        )
        best = (decomposition, error)
        theta = identification.theta
        lambda_pv, lambda_tcl = refit.lambda_pv, refit.lambda_tcl
        previous_pl, pl = pl, pl_new
        if converged(pl_new, previous_pl, cfg.conv_tol):
            is_converged = True
            break

    if not is_converged:
        logger.warning(f"EDCI stopped after {len(outer)} outer iterations without meeting conv_tol={cfg.conv_tol}")
    return EdciResult(
        decomposition=best[0],
        init=init,
        outer_trace=outer,
        newton_traces=traces,
        converged=is_converged,
        tcl_params=tcl_params,
        pv_sign=cfg.pv_sign,
        daily_cyclic=inverse.daily_cyclic,
    )


def predict(
    result: Union[EdciResult, IdentifiedModel],
    exogenous: Exogenous,
    tol: Optional[Tolerances] = None,
) -> Decomposition:
    """Apply an identified model to unseen price, irradiance and temperature."""
    model = result.model if isinstance(result, EdciResult) else result
    if exogenous.period != model.period:
        raise SeriesLengthError(f"exogenous period {exogenous.period} differs from the model's {model.period}")
    response = vb_response(model.theta, exogenous.price, tol, daily_cyclic=model.daily_cyclic)
    return Decomposition(
        esl=response.esl_total,
        pv=pv_response(model.lambda_pv, exogenous.irradiance),
        tcl=tcl_response(model.lambda_tcl, model.tcl_params, exogenous.temperature),
        pl=periodic_extend(model.pl_profile, exogenous.T, unit=Unit.MW),
        lambda_pv=model.lambda_pv,
        lambda_tcl=model.lambda_tcl,
        theta=model.theta,
    )
