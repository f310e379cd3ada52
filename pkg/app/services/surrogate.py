import logging
from collections import Counter
from typing import Iterable, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict

from app.core.errors import LinearProgramError, SeriesLengthError
from app.models.schemas import Matrix, TimeSeries, Unit, VbTheta
from app.models.solver import LinearProgram, LpSolution, LpStatus, Tolerances
from app.services.linalg import solve_lp, solve_square

logger = logging.getLogger(__name__)

# Inequality blocks per battery, in row order.
ROW_BLOCKS = ("power_upper", "power_lower", "energy_upper", "energy_lower")


class VbProgram(BaseModel):
    """A P_esl + B P_vb + C theta <= 0 with the coupling P_esl = sum_n P_n.

    A, B, C and the equality block depend only on (T, N); the price enters the
    cost and theta enters the right-hand side through C. With daily_cyclic each
    battery also returns to its start-of-day energy, one zero-sum row per day.
    """
    A: Matrix
    B: Matrix
    C: Matrix
    eq_lhs: Matrix
    price: TimeSeries
    n_batteries: int
    daily_cyclic: bool = False
    lp: LinearProgram

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    @property
    def T(self) -> int:
        return len(self.price)

    @property
    def ineq_lhs(self) -> np.ndarray:
        return np.hstack([self.A, self.B])

    def rhs(self, theta: VbTheta) -> np.ndarray:
        return -self.C @ theta.to_vector()

    def at(self, theta: VbTheta) -> "VbProgram":
        if theta.n_batteries != self.n_batteries:
            raise ValueError(f"theta has {theta.n_batteries} batteries, program has {self.n_batteries}")
        lp = self.lp.model_copy(update={"ineq_rhs": self.rhs(theta)})
        return self.model_copy(update={"lp": lp})

    def row_label(self, row: int) -> tuple[int, str, int]:
        """(battery, block, time index) of an inequality row."""
        T = self.T
        battery, rest = divmod(row, 4 * T)
        block, t = divmod(rest, T)
        return battery, ROW_BLOCKS[block], t


class VbResponse(BaseModel):
    esl_total: TimeSeries
    per_battery: Matrix
    binding_ineq: tuple[int, ...]
    degenerate: bool
    objective: float

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)


def binding_summary(program: VbProgram, rows: Iterable[int]) -> dict[str, int]:
    """Binding-row counts per constraint block, in ROW_BLOCKS order."""
    counts = Counter(program.row_label(int(row))[1] for row in rows)
    return {block: counts.get(block, 0) for block in ROW_BLOCKS}


def _cyclic_rows(T: int, period: int, N: int) -> np.ndarray:
    if T % period:
        raise SeriesLengthError(f"daily-cyclic batteries need whole days: T={T}, period={period}")
    day_sums = np.kron(np.eye(T // period), np.ones((1, period)))
    return np.hstack([np.zeros((N * day_sums.shape[0], T)), np.kron(np.eye(N), day_sums)])


def assemble_lp(theta: VbTheta, price: TimeSeries, daily_cyclic: bool = False) -> VbProgram:
    T = len(price)
    N = theta.n_batteries
    eye = np.eye(T)
    cum = np.tril(np.ones((T, T)))
    per_battery = np.vstack([eye, -eye, cum, -cum])

    B = np.zeros((4 * N * T, N * T))
    C = np.zeros((4 * N * T, 3 * N))
    for n in range(N):
        rows = slice(4 * n * T, 4 * (n + 1) * T)
        B[rows, n * T:(n + 1) * T] = per_battery
        block = np.zeros((4 * T, 3))
        block[:2 * T, 0] = -1.0       # +-P_n <= p_bar_n
        block[2 * T:3 * T, 1] = -1.0  # Lambda P_n <= e_bar_n
        block[3 * T:, 2] = 1.0        # -Lambda P_n <= -e_lower_n
        C[rows, 3 * n:3 * n + 3] = block
    A = np.zeros((4 * N * T, T))
    eq_lhs = np.hstack([eye, -np.tile(eye, (1, N))])
    if daily_cyclic:
        eq_lhs = np.vstack([eq_lhs, _cyclic_rows(T, price.period, N)])

    lp = LinearProgram(
        cost=np.concatenate([price.values, np.zeros(N * T)]),
        ineq_lhs=np.hstack([A, B]),
        ineq_rhs=-C @ theta.to_vector(),
        eq_lhs=eq_lhs,
        eq_rhs=np.zeros(eq_lhs.shape[0]),
    )
    return VbProgram(A=A, B=B, C=C, eq_lhs=eq_lhs, price=price, n_batteries=N, daily_cyclic=daily_cyclic, lp=lp)


def solve_program(program: VbProgram, tol: Optional[Tolerances] = None) -> tuple[VbResponse, LpSolution]:
    solution = solve_lp(program.lp, tol)
    if not solution.solved:
        # P = 0 is feasible for every valid theta, so this is a backend failure.
        logger.error(f"Virtual-battery LP returned {solution.status.value}")
        raise LinearProgramError(f"virtual-battery LP returned {solution.status.value}")
    T, N = program.T, program.n_batteries
    x = solution.x_opt
    response = VbResponse(
        esl_total=TimeSeries(values=x[:T], unit=Unit.MW, period=program.price.period),
        per_battery=x[T:].reshape(N, T),
        binding_ineq=solution.binding_ineq,
        degenerate=solution.status is LpStatus.DEGENERATE or not solution.is_vertex,
        objective=solution.objective,
    )
    return response, solution


def vb_response(
    theta: VbTheta,
    price: TimeSeries,
    tol: Optional[Tolerances] = None,
    daily_cyclic: bool = False,
) -> VbResponse:
    response, _ = solve_program(assemble_lp(theta, price, daily_cyclic), tol)
    return response


def response_sensitivity(program: VbProgram, solution: LpSolution, tol: Optional[Tolerances] = None) -> tuple[np.ndarray, np.ndarray, bool]:
    """Solve the binding system [A_b B_b] x = -C_b theta for dx/dtheta.

    Returns (F, G, rank_deficient) with F the T x 3N block for P_esl and G the
    NT x 3N block for the per-battery trajectories.
    """
    tol = tol or Tolerances()
    eq_rows = list(solution.basis_eq)
    ineq_rows = list(solution.basis_ineq)
    M = np.vstack([program.eq_lhs[eq_rows], program.ineq_lhs[ineq_rows]])
    rhs = np.vstack([np.zeros((len(eq_rows), program.C.shape[1])), -program.C[ineq_rows]])
    result = solve_square(M, rhs, tol.tol_rank)
    T = program.T
    return result.x[:T], result.x[T:], result.rank_deficient or M.shape[0] < M.shape[1]
