import logging
from typing import Optional, Sequence

import numpy as np
import scipy.linalg
from scipy.optimize import linprog

from app.core.errors import LinearProgramError
from app.models.solver import LinearProgram, LpSolution, LpStatus, Projector, SolveResult, Tolerances

logger = logging.getLogger(__name__)

# scipy/HiGHS status codes
_HIGHS_OPTIMAL = 0
_HIGHS_INFEASIBLE = 2
_HIGHS_UNBOUNDED = 3


def _lstsq(M: np.ndarray, rhs: np.ndarray, tol_rank: float) -> tuple[np.ndarray, int]:
    if M.size == 0:
        shape = (M.shape[1],) + rhs.shape[1:]
        return np.zeros(shape), 0
    x, _, rank, _ = scipy.linalg.lstsq(M, rhs, cond=tol_rank, lapack_driver="gelsd")
    return x, int(rank)


def solve_square(M: np.ndarray, rhs: np.ndarray, tol_rank: float) -> SolveResult:
    """Solve M X = rhs; minimum-norm least squares (flagged) when M is rank deficient."""
    M = np.asarray(M, dtype=float)
    rhs = np.asarray(rhs, dtype=float)
    x, rank = _lstsq(M, rhs, tol_rank)
    deficient = rank < M.shape[1]
    if deficient:
        logger.debug(f"Binding system rank {rank} < {M.shape[1]}; using minimum-norm solution")
    return SolveResult(x=x, rank=rank, rank_deficient=deficient)


def least_squares(F: np.ndarray, r: np.ndarray, tol_rank: float) -> SolveResult:
    """argmin ||F theta - r||_2, minimum norm among minimizers when F'F is singular."""
    F = np.asarray(F, dtype=float)
    r = np.asarray(r, dtype=float)
    x, rank = _lstsq(F, r, tol_rank)
    return SolveResult(x=x, rank=rank, rank_deficient=rank < F.shape[1])


def _pivoted_rows(rows: np.ndarray, threshold: float) -> list[int]:
    if rows.shape[0] == 0:
        return []
    _, r, perm = scipy.linalg.qr(rows.T, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    rank = int(np.sum(diag > threshold))
    return sorted(int(i) for i in perm[:rank])


def _project_out(rows: np.ndarray, basis_rows: np.ndarray) -> np.ndarray:
    if basis_rows.shape[0] == 0:
        return rows
    q, _ = np.linalg.qr(basis_rows.T)
    return rows - (rows @ q) @ q.T


def independent_rows(
    eq_rows: np.ndarray,
    ineq_rows: np.ndarray,
    tol_rank: float,
    priority: Sequence[int] = (),
) -> tuple[list[int], list[int]]:
    """Maximal independent subset of the stacked rows.

    Equality rows go first, then the inequality rows listed in priority, then
    the rest. Each group is reduced against the rows already chosen and pivoted
    QR picks within it. Returns local indices into eq_rows and ineq_rows.
    """
    scale = max(
        1.0,
        float(np.abs(eq_rows).max()) if eq_rows.size else 0.0,
        float(np.abs(ineq_rows).max()) if ineq_rows.size else 0.0,
    )
    threshold = tol_rank * scale * max(eq_rows.shape[1] if eq_rows.ndim == 2 else 1, 1)
    chosen_eq = _pivoted_rows(eq_rows, threshold)
    n_ineq = ineq_rows.shape[0]
    if n_ineq == 0:
        return chosen_eq, []

    first = sorted({int(i) for i in priority if 0 <= int(i) < n_ineq})
    taken = set(first)
    picked: list[int] = []
    for group in (first, [i for i in range(n_ineq) if i not in taken]):
        if not group:
            continue
        basis = np.vstack([eq_rows[chosen_eq], ineq_rows[picked]])
        residual = _project_out(ineq_rows[group], basis)
        picked.extend(group[i] for i in _pivoted_rows(residual, threshold))
    return chosen_eq, sorted(picked)


def residual_projector(columns: np.ndarray, tol_rank: float) -> Projector:
    """Projector onto the orthogonal complement of span(columns)."""
    columns = np.asarray(columns, dtype=float)
    if columns.ndim == 1:
        columns = columns[:, None]
    norms = np.linalg.norm(columns, axis=0)
    kept = columns[:, norms > 0] / norms[norms > 0]
    if kept.shape[1] == 0:
        return Projector(basis=np.zeros((columns.shape[0], 0)))
    q, r, _ = scipy.linalg.qr(kept, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    rank = int(np.sum(diag > tol_rank * max(float(diag[0]), 1.0) * kept.shape[1]))
    return Projector(basis=q[:, :rank])


def solve_lp(lp: LinearProgram, tol: Optional[Tolerances] = None) -> LpSolution:
    """Optimal vertex of a dense LP with its binding inequality set.

    The vertex comes from the HiGHS dual simplex, so the returned point is basic;
    the active set is read off the slacks with tol_bind.
    """
    tol = tol or Tolerances()
    n = lp.n_vars
    has_ineq = lp.ineq_lhs.shape[0] > 0
    has_eq = lp.eq_lhs.shape[0] > 0
    try:
        result = linprog(
            lp.cost,
            A_ub=lp.ineq_lhs if has_ineq else None,
            b_ub=lp.ineq_rhs if has_ineq else None,
            A_eq=lp.eq_lhs if has_eq else None,
            b_eq=lp.eq_rhs if has_eq else None,
            bounds=(None, None),
            method="highs-ds",
            options={
                "primal_feasibility_tolerance": max(tol.tol_feas, 1e-10),
                "dual_feasibility_tolerance": max(tol.tol_feas, 1e-10),
            },
        )
    except ValueError as e:
        logger.error(f"LP backend rejected the problem: {str(e)}")
        raise LinearProgramError(str(e)) from e

    if result.status == _HIGHS_INFEASIBLE:
        return LpSolution(x_opt=np.full(n, np.nan), objective=np.inf, binding_ineq=(), status=LpStatus.INFEASIBLE)
    if result.status == _HIGHS_UNBOUNDED:
        return LpSolution(x_opt=np.full(n, np.nan), objective=-np.inf, binding_ineq=(), status=LpStatus.UNBOUNDED)
    if result.status != _HIGHS_OPTIMAL:
        logger.error(f"LP solve failed with status {result.status}: {result.message}")
        raise LinearProgramError(f"LP solve failed: {result.message}")

    x = np.asarray(result.x, dtype=float)
    slack = lp.ineq_rhs - lp.ineq_lhs @ x
    binding = np.flatnonzero(np.abs(slack) <= tol.tol_bind)
    violation = max(
        float(-slack.min()) if slack.size else 0.0,
        float(np.abs(lp.eq_lhs @ x - lp.eq_rhs).max()) if has_eq else 0.0,
    )
    if violation > 10 * tol.tol_feas * max(1.0, float(np.abs(lp.ineq_rhs).max(initial=0.0))):
        logger.warning(f"LP optimum violates constraints by {violation:.3e}")

    ineq_marginals = getattr(getattr(result, "ineqlin", None), "marginals", None)
    eq_marginals = getattr(getattr(result, "eqlin", None), "marginals", None)
    mu = -np.asarray(ineq_marginals) if has_ineq and ineq_marginals is not None else np.zeros(lp.ineq_lhs.shape[0])

    # Rows carrying a positive multiplier belong to the optimal basis; prefer them.
    mu_floor = tol.tol_feas * max(1.0, float(np.abs(lp.cost).max(initial=0.0)))
    priority = [i for i, row in enumerate(binding) if mu[row] > mu_floor]
    chosen_eq, chosen_ineq = independent_rows(lp.eq_lhs, lp.ineq_lhs[binding], tol.tol_rank, priority=priority)
    n_active = lp.eq_lhs.shape[0] + binding.size
    status = LpStatus.DEGENERATE if n_active > n else LpStatus.OPTIMAL
    rank = len(chosen_eq) + len(chosen_ineq)
    if rank < n:
        logger.debug(f"Active rows have rank {rank} < {n}; optimum is not an isolated vertex")

    return LpSolution(
        x_opt=x,
        objective=float(lp.cost @ x),
        binding_ineq=tuple(int(i) for i in binding),
        status=status,
        basis_eq=tuple(chosen_eq),
        basis_ineq=tuple(int(binding[i]) for i in chosen_ineq),
        active_rank=rank,
        ineq_multipliers=mu,
        eq_multipliers=-np.asarray(eq_marginals) if has_eq and eq_marginals is not None else np.zeros(lp.eq_lhs.shape[0]),
    )
