import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from app.core.errors import SeriesLengthError
from app.models.schemas import Unit, VbTheta
from app.services.surrogate import assemble_lp, binding_summary, response_sensitivity, solve_program, vb_response
from tests.conftest import INTERIOR_THETA, series


def _theta(p, e_bar, e_lower):
    return VbTheta(p_bar=[p], e_bar=[e_bar], e_lower=[e_lower])


def test_program_shapes():
    program = assemble_lp(_theta(1.0, 1.0, -1.0), series([1.0, -1.0], unit=Unit.PRICE))
    assert program.lp.eq_lhs.shape == (2, 4)
    assert program.lp.ineq_lhs.shape == (8, 4)
    assert program.lp.n_vars == 4
    assert program.row_label(5) == (0, "energy_upper", 1)


def test_theta_enters_only_through_the_right_hand_side(rng):
    price = series(rng.normal(size=6), period=3, unit=Unit.PRICE)
    theta = VbTheta(p_bar=[1.0, 2.0], e_bar=[0.5, 3.0], e_lower=[-1.0, -0.2])
    scaled = VbTheta.from_vector(2.5 * theta.to_vector())
    base, other = assemble_lp(theta, price), assemble_lp(scaled, price)
    assert_array_equal(base.A, other.A)
    assert_array_equal(base.B, other.B)
    assert_allclose(other.lp.ineq_rhs, 2.5 * base.lp.ineq_rhs)
    assert_allclose(base.at(scaled).lp.ineq_rhs, other.lp.ineq_rhs)


def test_zero_power_gives_zero_response(rng):
    price = series(rng.normal(size=8), period=4, unit=Unit.PRICE)
    response = vb_response(VbTheta(p_bar=[0.0, 0.0], e_bar=[1.0, 2.0], e_lower=[-1.0, 0.0]), price)
    assert_allclose(response.esl_total.values, 0.0, atol=1e-12)


def test_two_slot_battery():
    response = vb_response(_theta(1.0, 1.0, -1.0), series([1.0, -1.0], unit=Unit.PRICE))
    assert_allclose(response.esl_total.values, [-1.0, 1.0], atol=1e-9)
    assert response.objective == pytest.approx(-2.0)
    assert response.per_battery.shape == (1, 2)


def test_flat_price_with_no_discharge_headroom():
    response = vb_response(_theta(1.0, 2.0, 0.0), series(np.full(4, 5.0), unit=Unit.PRICE))
    assert response.objective == pytest.approx(0.0, abs=1e-9)
    assert response.esl_total.values.sum() == pytest.approx(0.0, abs=1e-9)


def test_nondegenerate_vertex(four_slot_price):
    response, solution = solve_program(assemble_lp(_theta(1.0, 1.5, -0.3), four_slot_price))
    assert_allclose(response.esl_total.values, [1.0, -1.0, 0.7, -1.0], atol=1e-9)
    assert not response.degenerate
    assert solution.is_vertex
    assert len(response.binding_ineq) == 4


def test_sensitivity_matches_finite_differences(four_slot_price):
    theta = _theta(1.0, 1.5, -0.3)
    program = assemble_lp(theta, four_slot_price)
    _, solution = solve_program(program)
    F, G, deficient = response_sensitivity(program, solution)
    assert not deficient
    assert_allclose(F[:, 0], [1.0, -1.0, 1.0, -1.0], atol=1e-9)
    assert_allclose(F[:, 1], 0.0, atol=1e-9)
    assert_allclose(F[:, 2], [0.0, 0.0, 1.0, 0.0], atol=1e-9)
    assert G.shape == (4, 3)

    h = 1e-5
    base = theta.to_vector()
    for j in range(3):
        step = np.zeros(3)
        step[j] = h
        up = vb_response(VbTheta.from_vector(base + step), four_slot_price).esl_total.values
        down = vb_response(VbTheta.from_vector(base - step), four_slot_price).esl_total.values
        fd = (up - down) / (2 * h)
        assert np.linalg.norm(fd - F[:, j]) <= 1e-4 * max(np.linalg.norm(F[:, j]), 1.0)


def test_binding_summary_counts_rows_per_block(four_slot_price):
    program = assemble_lp(_theta(1.0, 1.5, -0.3), four_slot_price)
    response, _ = solve_program(program)
    summary = binding_summary(program, response.binding_ineq)
    assert summary == {"power_upper": 1, "power_lower": 2, "energy_upper": 0, "energy_lower": 1}


def test_larger_batteries_never_cost_more(rng):
    price = series(rng.uniform(10, 60, 12), period=6, unit=Unit.PRICE)
    for _ in range(10):
        small = VbTheta(p_bar=rng.uniform(0, 2, 2), e_bar=rng.uniform(0, 3, 2), e_lower=-rng.uniform(0, 3, 2))
        grow = rng.uniform(0, 1, (2, 3))
        large = VbTheta(p_bar=small.p_bar + grow[:, 0], e_bar=small.e_bar + grow[:, 1], e_lower=small.e_lower - grow[:, 2])
        for cyclic in (False, True):
            assert vb_response(large, price, daily_cyclic=cyclic).objective <= (
                vb_response(small, price, daily_cyclic=cyclic).objective + 1e-9
            )


def test_binding_set_is_stable_inside_a_critical_region(evening_peak_price):
    _, solution = solve_program(assemble_lp(INTERIOR_THETA, evening_peak_price))
    assert solution.is_vertex
    assert len(solution.binding_ineq) == 4
    base = INTERIOR_THETA.to_vector()
    for j in range(3):
        for sign in (1.0, -1.0):
            nudged = base.copy()
            nudged[j] += sign * 1e-9
            response = vb_response(VbTheta.from_vector(nudged), evening_peak_price)
            assert response.binding_ineq == solution.binding_ineq


def test_daily_cyclic_batteries_net_to_zero_each_day(rng):
    price = series(rng.uniform(10, 60, 12), period=4, unit=Unit.PRICE)
    theta = VbTheta(p_bar=[1.0, 0.5], e_bar=[2.0, 0.3], e_lower=[-0.5, -1.0])
    program = assemble_lp(theta, price, daily_cyclic=True)
    assert program.lp.eq_lhs.shape == (12 + 2 * 3, 12 * 3)
    response = vb_response(theta, price, daily_cyclic=True)
    assert_allclose(response.per_battery.reshape(2, 3, 4).sum(axis=2), 0.0, atol=1e-9)
    assert response.objective >= vb_response(theta, price).objective - 1e-9


def test_daily_cyclic_program_needs_whole_days():
    with pytest.raises(SeriesLengthError):
        assemble_lp(_theta(1.0, 1.0, -1.0), series(np.ones(6), period=4, unit=Unit.PRICE), daily_cyclic=True)
