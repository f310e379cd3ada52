from pydantic import BaseModel, ConfigDict, Field, model_validator
from typing import NamedTuple
from enum import Enum

import numpy as np

from app.core.config import settings
from app.models.schemas import Matrix, Vector


class Tolerances(BaseModel):
    tol_feas: float = Field(default_factory=lambda: settings.TOL_FEAS, gt=0)
    tol_bind: float = Field(default_factory=lambda: settings.TOL_BIND, gt=0)
    tol_rank: float = Field(default_factory=lambda: settings.TOL_RANK, gt=0)

    model_config = ConfigDict(frozen=True)


class LinearProgram(BaseModel):
    """min cost.x  s.t.  ineq_lhs x <= ineq_rhs,  eq_lhs x = eq_rhs,  x free."""
    cost: Vector
    ineq_lhs: Matrix
    ineq_rhs: Vector
    eq_lhs: Matrix
    eq_rhs: Vector

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    @model_validator(mode="before")
    @classmethod
    def _empty_blocks(cls, data):
        if isinstance(data, dict) and "cost" in data:
            n = len(np.asarray(data["cost"]).ravel())
            for lhs, rhs in (("ineq_lhs", "ineq_rhs"), ("eq_lhs", "eq_rhs")):
                if data.get(lhs) is None or np.asarray(data[lhs]).size == 0:
                    data = {**data, lhs: np.zeros((0, n)), rhs: np.zeros(0)}
        return data

    @model_validator(mode="after")
    def _consistent(self):
        n = self.cost.size
        for name, lhs, rhs in (("ineq", self.ineq_lhs, self.ineq_rhs), ("eq", self.eq_lhs, self.eq_rhs)):
            if lhs.shape[1] != n:
                raise ValueError(f"{name}_lhs has {lhs.shape[1]} columns, cost has {n} entries")
            if lhs.shape[0] != rhs.size:
                raise ValueError(f"{name}_lhs has {lhs.shape[0]} rows, {name}_rhs has {rhs.size} entries")
        for name in ("cost", "ineq_lhs", "ineq_rhs", "eq_lhs", "eq_rhs"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise ValueError(f"{name} contains non-finite entries")
        return self

    @property
    def n_vars(self) -> int:
        return int(self.cost.size)


class LpStatus(str, Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"
    DEGENERATE = "Degenerate"


class LpSolution(BaseModel):
    x_opt: Vector
    objective: float
    binding_ineq: tuple[int, ...]
    status: LpStatus
    # Maximal linearly independent subset of the active rows (equalities first).
    basis_eq: tuple[int, ...] = ()
    basis_ineq: tuple[int, ...] = ()
    active_rank: int = 0
    # Nonnegative multipliers with cost + ineq_lhs' mu + eq_lhs' nu = 0.
    ineq_multipliers: Vector = Field(default_factory=lambda: np.zeros(0))
    eq_multipliers: Vector = Field(default_factory=lambda: np.zeros(0))

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    @property
    def solved(self) -> bool:
        return self.status in (LpStatus.OPTIMAL, LpStatus.DEGENERATE)

    @property
    def is_vertex(self) -> bool:
        return self.solved and self.active_rank == self.x_opt.size


class SolveResult(NamedTuple):
    x: np.ndarray
    rank: int
    rank_deficient: bool


class Projector(BaseModel):
    """Orthogonal projector x -> x - Q Q'x onto the complement of span(Q)."""
    basis: Matrix

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    @property
    def rank(self) -> int:
        return int(self.basis.shape[1])

    def apply(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.rank == 0:
            return x
        return x - self.basis @ (self.basis.T @ x)
