"""Identify virtual-battery parameters from a target ESL trajectory.

Each Newton iteration solves the surrogate LP at the current theta, reads off
its binding constraints, and uses the resulting linear map theta -> P_esl
(valid inside the current critical region) for a least-squares update. At a
degenerate vertex the neighbouring regions are searched for a descent step.
"""
import logging
from itertools import combinations_with_replacement, product
from typing import NamedTuple, Optional, Sequence

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field

from app.core.errors import SeriesLengthError
from app.models.schemas import ScenarioData, TclParams, TimeSeries, VbTheta
from app.models.solver import Projector, Tolerances
from app.services.linalg import least_squares
from app.services.physics import pv_response, tcl_response
from app.services.surrogate import (
    VbProgram,
    VbResponse,
    assemble_lp,
    binding_summary,
    response_sensitivity,
    solve_program,
)

logger = logging.getLogger(__name__)


class InverseConfig(BaseModel):
    max_iter: int = Field(default=30, ge=1)
    # None means 1e-6 * ||target||_2
    loss_tol: Optional[float] = Field(default=None, gt=0)
    grid_points_per_dim: int = Field(default=3, ge=2)
    damping_enabled: bool = True
    max_halvings: int = Field(default=10, ge=0)
    # Surrogate batteries return to their start-of-day energy.
    daily_cyclic: bool = False
    # Relative offset used to reach neighbouring critical regions at a stalled vertex.
    region_step: float = Field(default=1e-5, gt=0, lt=1)
    tol: Tolerances = Field(default_factory=Tolerances)

    model_config = ConfigDict(frozen=True)

    def resolved_loss_tol(self, target: TimeSeries) -> float:
        if self.loss_tol is not None:
            return self.loss_tol
        return max(1e-6 * float(np.linalg.norm(target.values)), 1e-12)


class NewtonRecord(BaseModel):
    iteration: int
    theta: VbTheta
    loss: float
    binding_count: int
    degenerate: bool
    damped: bool = False
    accepted: bool = True

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)


class NewtonTrace(BaseModel):
    records: list[NewtonRecord] = Field(default_factory=list)

    model_config = ConfigDict(arbitrary_types_allowed=True)

    def __len__(self) -> int:
        return len(self.records)

    def accepted_losses(self) -> list[float]:
        return [r.loss for r in self.records if r.accepted]

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            [
                {
                    "iteration": r.iteration,
                    "loss": r.loss,
                    "binding_count": r.binding_count,
                    "degenerate": r.degenerate,
                    "damped": r.damped,
                    "accepted": r.accepted,
                }
                for r in self.records
            ],
            columns=["iteration", "loss", "binding_count", "degenerate", "damped", "accepted"],
        )


class NewtonStep(NamedTuple):
    theta_next: VbTheta
    theta_raw: np.ndarray
    theta_anchored: np.ndarray
    F: np.ndarray
    G: np.ndarray
    response: VbResponse
    degenerate: bool
    rank_deficient: bool


class Identification(NamedTuple):
    theta: VbTheta
    response: VbResponse
    loss: float
    trace: NewtonTrace


def esl_target(
    scenario: ScenarioData,
    lambda_pv: float,
    lambda_tcl: float,
    pl: TimeSeries,
    tcl_params: TclParams,
) -> TimeSeries:
    """What is left of the total load for the storage-like component to explain."""
    if len(pl) != scenario.T:
        raise SeriesLengthError(f"PL has {len(pl)} samples, scenario has {scenario.T}")
    pv = pv_response(lambda_pv, scenario.irradiance).values
    tcl = tcl_response(lambda_tcl, tcl_params, scenario.temperature).values
    return scenario.total_load.with_values(scenario.total_load.values - pv - tcl - pl.values)


def _residual(response: VbResponse, target: TimeSeries, projector: Optional[Projector]) -> np.ndarray:
    residual = response.esl_total.values - target.values
    return projector.apply(residual) if projector is not None else residual


def _loss(response: VbResponse, target: TimeSeries, projector: Optional[Projector] = None) -> float:
    return float(np.linalg.norm(_residual(response, target, projector)))


def _evaluate(
    program: VbProgram,
    theta: VbTheta,
    target: TimeSeries,
    tol: Tolerances,
    projector: Optional[Projector] = None,
) -> tuple[VbResponse, float]:
    response, _ = solve_program(program.at(theta), tol)
    return response, _loss(response, target, projector)


def _duplicate_factor(k: int) -> float:
    # 1, 1.1, 0.9, 1.2, 0.8, ...
    magnitude = (k + 1) // 2
    sign = 1.0 if k % 2 else -1.0
    return 1.0 + 0.1 * magnitude * sign


def lattice(target: TimeSeries, n_batteries: int, grid_points: int = 3) -> list[VbTheta]:
    """Coarse candidate set scaled to the target's magnitude.

    Per battery p_bar takes evenly spaced fractions of max|target| (zero
    included) and e_bar halving fractions of max|target| * D / 4, with
    e_lower = -e_bar. Batteries are unordered, and repeated choices are spread
    by +-10% steps so no two batteries coincide.
    """
    p_scale = float(np.max(np.abs(target.values)))
    e_scale = p_scale * target.period / 4
    p_levels = np.linspace(0.0, 1.0, grid_points) * p_scale
    e_levels = np.array([2.0 ** -(grid_points - 1 - i) for i in range(grid_points)]) * e_scale
    options = list(product(p_levels, e_levels))

    candidates: list[VbTheta] = []
    seen: set[tuple[float, ...]] = set()
    for combo in combinations_with_replacement(range(len(options)), n_batteries):
        p_bar, e_bar, repeats = [], [], {}
        for index in combo:
            k = repeats.get(index, 0)
            repeats[index] = k + 1
            factor = _duplicate_factor(k)
            p_bar.append(options[index][0] * factor)
            e_bar.append(options[index][1] * factor)
        theta = VbTheta(p_bar=p_bar, e_bar=e_bar, e_lower=-np.asarray(e_bar))
        key = tuple(np.round(theta.to_vector(), 12))
        if key not in seen:
            seen.add(key)
            candidates.append(theta)
    return candidates


def _grid_search(
    target: TimeSeries,
    program: VbProgram,
    candidates: Sequence[VbTheta],
    tol: Tolerances,
    projector: Optional[Projector] = None,
) -> tuple[VbTheta, VbResponse, float]:
    best: Optional[tuple[VbTheta, VbResponse, float]] = None
    for theta in candidates:
        response, loss = _evaluate(program, theta, target, tol, projector)
        if best is None or loss < best[2]:
            best = (theta, response, loss)
    logger.debug(f"Grid search over {len(candidates)} candidates: best loss {best[2]:.6g}")
    return best


def _lattice_target(target: TimeSeries, projector: Optional[Projector]) -> TimeSeries:
    return target.with_values(projector.apply(target.values)) if projector is not None else target


def grid_init(
    target: TimeSeries,
    price: TimeSeries,
    n_batteries: int,
    cfg: InverseConfig,
    candidates: Optional[Sequence[VbTheta]] = None,
    projector: Optional[Projector] = None,
) -> VbTheta:
    if candidates is None:
        candidates = lattice(_lattice_target(target, projector), n_batteries, cfg.grid_points_per_dim)
    candidates = list(candidates)
    if not candidates:
        raise ValueError("grid search needs at least one candidate")
    program = assemble_lp(candidates[0], price, cfg.daily_cyclic)
    theta, _, _ = _grid_search(target, program, candidates, cfg.tol, projector)
    return theta


def _fit(F: np.ndarray, target: TimeSeries, current: np.ndarray, projector: Optional[Projector], tol_rank: float):
    """Absolute and anchored minimizers of ||M (F theta - target)||."""
    MF = projector.apply(F) if projector is not None else F
    Mt = projector.apply(target.values) if projector is not None else target.values
    absolute = least_squares(MF, Mt, tol_rank)
    anchored = least_squares(MF, Mt - MF @ current, tol_rank)
    return absolute, current + anchored.x


def newton_step(
    theta_k: VbTheta,
    target: TimeSeries,
    price: TimeSeries,
    tol: Optional[Tolerances] = None,
    program: Optional[VbProgram] = None,
    projector: Optional[Projector] = None,
    daily_cyclic: bool = False,
) -> NewtonStep:
    """One linearize-and-refit update of theta.

    Inside the critical region of theta_k the response is P_esl = F theta, so
    the update is theta = argmin ||F theta - target||, minimum norm when F'F is
    singular. theta_anchored is the minimizer closest to theta_k instead, which
    keeps parameters F cannot see (zero columns) where they are. With a
    projector both fits are taken after removing its span from F and target.
    """
    tol = tol or Tolerances()
    program = program.at(theta_k) if program is not None else assemble_lp(theta_k, price, daily_cyclic)
    response, solution = solve_program(program, tol)
    F, G, binding_deficient = response_sensitivity(program, solution, tol)

    absolute, anchored = _fit(F, target, theta_k.to_vector(), projector, tol.tol_rank)
    logger.debug(f"Newton basis at theta_k: {binding_summary(program, solution.basis_ineq)}")
    if absolute.rank_deficient:
        logger.debug(f"F has rank {absolute.rank} < {F.shape[1]}; using the minimum-norm solution")
    return NewtonStep(
        theta_next=VbTheta.from_vector(absolute.x, project=True),
        theta_raw=absolute.x,
        theta_anchored=anchored,
        F=F,
        G=G,
        response=response,
        degenerate=response.degenerate or binding_deficient,
        rank_deficient=absolute.rank_deficient,
    )


def _neighbours(theta: VbTheta, h: float) -> list[np.ndarray]:
    """theta shifted by +-h along each coordinate, keeping only valid points."""
    base = theta.to_vector()
    shifted = []
    for j in range(base.size):
        for sign in (1.0, -1.0):
            point = base.copy()
            point[j] += sign * h
            rows = point.reshape(-1, 3)
            if np.all(rows[:, 0] >= 0) and np.all(rows[:, 1] >= 0) and np.all(rows[:, 2] <= 0):
                shifted.append(point)
    return shifted


class _Trial(NamedTuple):
    theta: VbTheta
    response: VbResponse
    loss: float


def _best_trial(
    raws: Sequence[np.ndarray],
    program: VbProgram,
    target: TimeSeries,
    tol: Tolerances,
    projector: Optional[Projector],
) -> Optional[_Trial]:
    best: Optional[_Trial] = None
    for raw in raws:
        theta = VbTheta.from_vector(raw, project=True)
        response, loss = _evaluate(program, theta, target, tol, projector)
        if best is None or loss < best.loss:
            best = _Trial(theta, response, loss)
    return best


def _adjacent_trial(
    theta: VbTheta,
    program: VbProgram,
    target: TimeSeries,
    cfg: InverseConfig,
    projector: Optional[Projector],
) -> Optional[_Trial]:
    """Best step using the linear map of a critical region touching theta.

    At a degenerate vertex the map read off the current basis can point back
    into the vertex; the regions around it are reached by nudging one
    coordinate at a time.
    """
    tol = cfg.tol
    h = cfg.region_step * max(1.0, float(np.abs(theta.to_vector()).max()))
    current = theta.to_vector()
    raws: list[np.ndarray] = []
    for point in _neighbours(theta, h):
        shifted = program.at(VbTheta.from_vector(point, project=False))
        _, solution = solve_program(shifted, tol)
        F, _, _ = response_sensitivity(shifted, solution, tol)
        absolute, anchored = _fit(F, target, current, projector, tol.tol_rank)
        raws.extend([absolute.x, anchored])
    logger.debug(f"Searched {len(raws) // 2} neighbouring regions for a descent step")
    return _best_trial(raws, program, target, tol, projector)


def _damped_trial(
    start: np.ndarray,
    full: np.ndarray,
    loss: float,
    program: VbProgram,
    target: TimeSeries,
    cfg: InverseConfig,
    projector: Optional[Projector],
) -> Optional[_Trial]:
    eta = 1.0
    for _ in range(cfg.max_halvings):
        eta /= 2
        trial = VbTheta.from_vector(start + eta * (full - start))
        response, trial_loss = _evaluate(program, trial, target, cfg.tol, projector)
        if trial_loss < loss:
            return _Trial(trial, response, trial_loss)
    return None


def identify_esl(
    target: TimeSeries,
    price: TimeSeries,
    n_batteries: int,
    cfg: Optional[InverseConfig] = None,
    theta0: Optional[VbTheta] = None,
    projector: Optional[Projector] = None,
) -> Identification:
    """Grid (or warm) start followed by damped Newton steps; returns the best iterate.

    With a projector the loss is ||M (P_esl - target)||, M removing the
    projector's span, so components fitted jointly elsewhere do not pull on theta.
    """
    cfg = cfg or InverseConfig()
    tol = cfg.tol
    if len(target) < 3 * n_batteries:
        logger.warning(f"T={len(target)} < 3N={3 * n_batteries}: theta is not identifiable")
    eps = cfg.resolved_loss_tol(target)
    program = assemble_lp(theta0 or VbTheta.zeros(n_batteries), price, cfg.daily_cyclic)

    start: Optional[_Trial] = None
    if theta0 is not None:
        response, loss = _evaluate(program, theta0, target, tol, projector)
        # The zero fleet has zero response, so its loss is the norm of the target.
        zero_loss = float(np.linalg.norm(projector.apply(target.values) if projector is not None else target.values))
        if loss < zero_loss or loss <= eps:
            start = _Trial(theta0, response, loss)
        else:
            logger.debug(f"Warm start loss {loss:.6g} is no better than the empty fleet; searching the grid")
    if start is None:
        candidates = lattice(_lattice_target(target, projector), n_batteries, cfg.grid_points_per_dim)
        start = _Trial(*_grid_search(target, program, candidates, tol, projector))
    theta, response, loss = start

    trace = NewtonTrace()
    trace.records.append(NewtonRecord(
        iteration=0, theta=theta, loss=loss,
        binding_count=len(response.binding_ineq), degenerate=response.degenerate,
    ))
    best = start

    for k in range(1, cfg.max_iter + 1):
        if loss <= eps:
            break
        step = newton_step(theta, target, price, tol, program, projector)
        primary = _best_trial([step.theta_raw, step.theta_anchored], program, target, tol, projector)
        candidate: Optional[_Trial] = primary if primary.loss < loss else None
        damped = False

        if candidate is None:
            adjacent = _adjacent_trial(theta, program, target, cfg, projector)
            if adjacent is not None and adjacent.loss < loss:
                candidate = adjacent
            elif cfg.damping_enabled:
                current = theta.to_vector()
                directions = [primary.theta.to_vector()]
                if adjacent is not None:
                    directions.append(adjacent.theta.to_vector())
                for full in directions:
                    candidate = _damped_trial(current, full, loss, program, target, cfg, projector)
                    if candidate is not None:
                        damped = True
                        break

        if candidate is None:
            trace.records.append(NewtonRecord(
                iteration=k, theta=primary.theta, loss=primary.loss,
                binding_count=len(primary.response.binding_ineq),
                degenerate=primary.response.degenerate or step.degenerate,
                damped=cfg.damping_enabled, accepted=False,
            ))
            logger.debug(f"Newton iteration {k}: no step improves loss {loss:.6g}; stopping")
            break

        trace.records.append(NewtonRecord(
            iteration=k, theta=candidate.theta, loss=candidate.loss,
            binding_count=len(candidate.response.binding_ineq),
            degenerate=candidate.response.degenerate or step.degenerate,
            damped=damped,
        ))
        logger.debug(
            f"Newton iteration {k}: loss {candidate.loss:.6g} (binding {len(candidate.response.binding_ineq)}, "
            f"damped={damped}, rank_deficient={step.rank_deficient})"
        )
        change = loss - candidate.loss
        theta, response, loss = candidate
        if loss < best.loss:
            best = candidate
        if change <= eps:
            break

    return Identification(theta=best.theta, response=best.response, loss=best.loss, trace=trace)
