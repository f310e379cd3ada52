from itertools import combinations

import numpy as np
import pytest
from numpy.testing import assert_allclose
from pydantic import ValidationError

from app.models.solver import LinearProgram, LpStatus
from app.services.linalg import independent_rows, least_squares, residual_projector, solve_lp, solve_square


def _vertex_minimum(lp: LinearProgram) -> float:
    """Minimum objective over all basic feasible points, by enumeration."""
    n = lp.n_vars
    rows = np.vstack([lp.eq_lhs, lp.ineq_lhs])
    rhs = np.concatenate([lp.eq_rhs, lp.ineq_rhs])
    n_eq = lp.eq_lhs.shape[0]
    best = np.inf
    for chosen in combinations(range(n_eq, rows.shape[0]), n - n_eq):
        index = list(range(n_eq)) + list(chosen)
        M = rows[index]
        if abs(np.linalg.det(M)) < 1e-9:
            continue
        x = np.linalg.solve(M, rhs[index])
        if np.all(lp.ineq_lhs @ x <= lp.ineq_rhs + 1e-9) and np.allclose(lp.eq_lhs @ x, lp.eq_rhs, atol=1e-9):
            best = min(best, float(lp.cost @ x))
    return best


def _random_lp(rng: np.random.Generator, with_equality: bool) -> LinearProgram:
    n = int(rng.integers(2, 5))
    m = int(rng.integers(1, 5))
    box = np.vstack([np.eye(n), -np.eye(n)])
    extra = rng.normal(size=(m, n))
    ineq_lhs = np.vstack([box, extra])
    ineq_rhs = np.concatenate([rng.uniform(0.5, 2.0, 2 * n), rng.uniform(0.1, 1.0, m)])
    eq_lhs = rng.normal(size=(1, n)) if with_equality else None
    return LinearProgram(
        cost=rng.normal(size=n),
        ineq_lhs=ineq_lhs,
        ineq_rhs=ineq_rhs,
        eq_lhs=eq_lhs,
        eq_rhs=np.zeros(1) if with_equality else None,
    )


def test_min_x_on_unit_interval():
    lp = LinearProgram(cost=[1.0], ineq_lhs=[[1.0], [-1.0]], ineq_rhs=[1.0, 0.0])
    solution = solve_lp(lp)
    assert solution.status is LpStatus.OPTIMAL
    assert solution.x_opt[0] == pytest.approx(0.0, abs=1e-12)
    assert solution.binding_ineq == (1,)


def test_unique_vertex_optimum():
    lp = LinearProgram(
        cost=[-2.0, -1.0],
        ineq_lhs=[[1.0, 1.0], [-1.0, 0.0], [0.0, -1.0]],
        ineq_rhs=[1.0, 0.0, 0.0],
    )
    solution = solve_lp(lp)
    assert_allclose(solution.x_opt, [1.0, 0.0], atol=1e-10)
    assert solution.objective == pytest.approx(-2.0)
    assert set(solution.binding_ineq) == {0, 2}
    assert solution.is_vertex


def test_infeasible_and_unbounded_are_reported():
    infeasible = LinearProgram(cost=[1.0], ineq_lhs=[[1.0], [-1.0]], ineq_rhs=[-1.0, -1.0])
    solution = solve_lp(infeasible)
    assert solution.status is LpStatus.INFEASIBLE
    assert solution.objective == np.inf
    assert np.all(np.isnan(solution.x_opt))

    unbounded = LinearProgram(cost=[-1.0], ineq_lhs=[[-1.0]], ineq_rhs=[0.0])
    solution = solve_lp(unbounded)
    assert solution.status is LpStatus.UNBOUNDED
    assert solution.objective == -np.inf


def test_degenerate_vertex_keeps_an_independent_subset():
    lp = LinearProgram(
        cost=[-1.0, -1.0],
        ineq_lhs=[[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]],
        ineq_rhs=[0.0, 0.0, 0.0],
    )
    solution = solve_lp(lp)
    assert solution.status is LpStatus.DEGENERATE
    assert solution.solved
    assert len(solution.binding_ineq) == 3
    assert len(solution.basis_ineq) == 2
    assert solution.active_rank == 2


def test_dimension_mismatch_is_rejected():
    with pytest.raises(ValidationError):
        LinearProgram(cost=[1.0, 1.0], ineq_lhs=[[1.0]], ineq_rhs=[1.0])
    with pytest.raises(ValidationError):
        LinearProgram(cost=[1.0], ineq_lhs=[[1.0], [2.0]], ineq_rhs=[1.0])


@pytest.mark.parametrize("with_equality", [False, True])
def test_random_instances_match_vertex_enumeration(rng, with_equality):
    for _ in range(60):
        lp = _random_lp(rng, with_equality)
        solution = solve_lp(lp)
        assert solution.solved
        assert solution.objective == pytest.approx(_vertex_minimum(lp), abs=1e-8)

        # KKT: stationarity, dual feasibility and complementary slackness
        mu, nu = solution.ineq_multipliers, solution.eq_multipliers
        slack = lp.ineq_rhs - lp.ineq_lhs @ solution.x_opt
        assert np.all(mu >= -1e-9)
        assert np.all(np.abs(mu * slack) <= 1e-6)
        assert_allclose(lp.cost + lp.ineq_lhs.T @ mu + lp.eq_lhs.T @ nu, 0.0, atol=1e-6)


def test_solve_square_cases(rng):
    r = rng.normal(size=(3, 2))
    assert_allclose(solve_square(np.eye(3), r, 1e-10).x, r)
    assert_allclose(solve_square([[2.0, 0.0], [0.0, 4.0]], [2.0, 8.0], 1e-10).x, [1.0, 2.0])

    M = rng.normal(size=(20, 20)) + 20 * np.eye(20)
    rhs = rng.normal(size=(20, 3))
    result = solve_square(M, rhs, 1e-10)
    assert not result.rank_deficient
    assert np.linalg.norm(M @ result.x - rhs) / np.linalg.norm(rhs) <= 1e-10


def test_solve_square_flags_rank_deficiency():
    result = solve_square([[1.0, 1.0], [1.0, 1.0]], [2.0, 2.0], 1e-10)
    assert result.rank_deficient
    assert result.rank == 1
    assert_allclose(result.x, [1.0, 1.0])


def test_least_squares_cases(rng):
    q, _ = np.linalg.qr(rng.normal(size=(10, 3)))
    r = rng.normal(size=10)
    assert_allclose(least_squares(q, r, 1e-10).x, q.T @ r, atol=1e-12)

    F = rng.normal(size=(50, 3))
    theta = np.array([1.0, -2.0, 0.5])
    assert_allclose(F @ least_squares(F, F @ theta, 1e-10).x, F @ theta, atol=1e-10)

    r = rng.normal(size=50)
    oracle = np.linalg.solve(F.T @ F, F.T @ r)
    assert_allclose(least_squares(F, r, 1e-10).x, oracle, atol=1e-8)


def test_least_squares_minimum_norm_on_zero_column():
    F = np.column_stack([np.zeros(4), np.ones(4)])
    result = least_squares(F, np.full(4, 3.0), 1e-10)
    assert result.rank_deficient
    assert_allclose(result.x, [0.0, 3.0], atol=1e-12)


def test_optimum_is_no_worse_than_sampled_feasible_points(rng):
    for _ in range(20):
        lp = _random_lp(rng, with_equality=False)
        solution = solve_lp(lp)
        n = lp.n_vars
        samples = rng.uniform(-lp.ineq_rhs[n:2 * n], lp.ineq_rhs[:n], size=(2000, n))
        feasible = samples[np.all(samples @ lp.ineq_lhs.T <= lp.ineq_rhs, axis=1)]
        assert feasible.size > 0
        assert np.all(solution.objective <= feasible @ lp.cost + 1e-9)


def test_least_squares_residual_is_orthogonal_to_the_columns(rng):
    for shape in [(30, 3), (12, 6), (100, 9)]:
        F = rng.normal(size=shape)
        r = rng.normal(size=shape[0])
        theta = least_squares(F, r, 1e-10).x
        bound = 1e-8 * np.linalg.norm(F.T, 2) * np.linalg.norm(r)
        assert np.linalg.norm(F.T @ (F @ theta - r)) <= bound


def test_independent_rows_takes_priority_rows_first():
    rows = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
    no_eq = np.zeros((0, 2))
    _, picked = independent_rows(no_eq, rows, 1e-10, priority=[2])
    assert 2 in picked
    assert len(picked) == 2

    eq = np.array([[1.0, -1.0]])
    chosen_eq, picked = independent_rows(eq, rows, 1e-10, priority=[0])
    assert chosen_eq == [0]
    assert picked == [0]


def test_degenerate_basis_holds_every_row_with_a_positive_multiplier():
    lp = LinearProgram(
        cost=[-1.0, -2.0],
        ineq_lhs=[[1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [-1.0, 0.0]],
        ineq_rhs=[1.0, 1.0, 2.0, 0.0],
    )
    solution = solve_lp(lp)
    assert solution.status is LpStatus.DEGENERATE
    positive = {i for i, mu in enumerate(solution.ineq_multipliers) if mu > 1e-9}
    assert positive
    assert positive <= set(solution.basis_ineq)
    assert len(solution.basis_ineq) == 2


def test_residual_projector_removes_the_span(rng):
    v, w = rng.normal(size=8), rng.normal(size=8)
    projector = residual_projector(np.column_stack([v, 2 * v, w, np.zeros(8)]), 1e-10)
    assert projector.rank == 2
    assert_allclose(projector.apply(v), 0.0, atol=1e-12)
    x = rng.normal(size=8)
    assert abs(w @ projector.apply(x)) <= 1e-12 * np.linalg.norm(w) * np.linalg.norm(x)
    assert_allclose(projector.apply(projector.apply(x)), projector.apply(x), atol=1e-12)
