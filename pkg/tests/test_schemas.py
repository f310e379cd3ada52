import numpy as np
import pytest
from numpy.testing import assert_array_equal
from pydantic import ValidationError

from app.core.errors import SeriesLengthError
from app.models.schemas import Decomposition, Exogenous, PvSign, TclParams, TimeSeries, VbTheta
from app.services.timeseries import daily_cumulant, day_average, is_periodic, periodic_basis, periodic_extend, remove_periodic
from tests.conftest import series


def test_daily_cumulant_sums_each_day():
    assert_array_equal(daily_cumulant(series([1, 2, 3, 4], period=2)), [3, 7])
    assert_array_equal(daily_cumulant(series(np.zeros(48), period=24)), [0, 0])


def test_daily_cumulant_rejects_partial_days():
    with pytest.raises(SeriesLengthError):
        daily_cumulant(series(np.ones(25), period=24))


def test_periodic_extend_tiles_the_profile():
    assert_array_equal(periodic_extend([1, 2], 4).values, [1, 2, 1, 2])
    assert_array_equal(periodic_extend(np.ones(24), 144).values, np.ones(144))
    profile = np.arange(24.0)
    extended = periodic_extend(profile, 24)
    assert_array_equal(extended.values, profile)
    assert extended.period == 24


def test_periodic_extend_rejects_partial_days():
    with pytest.raises(SeriesLengthError):
        periodic_extend([1, 2, 3], 7)


def test_day_average_is_identity_on_periodic_input():
    periodic = periodic_extend([3.0, -1.0, 2.0], 12)
    assert_array_equal(day_average(periodic), [3.0, -1.0, 2.0])
    assert is_periodic(periodic)


def test_remove_periodic_leaves_only_the_day_to_day_part():
    s = series([1.0, 5.0, 3.0, 7.0], period=2)
    assert_array_equal(remove_periodic(s).values, [-1.0, -1.0, 1.0, 1.0])
    assert_array_equal(periodic_basis(4, 2) @ [2.0, 9.0], [2.0, 9.0, 2.0, 9.0])


def test_day_average_removes_zero_mean_noise():
    noise = np.array([[0.5, -1.0], [-0.5, 1.0]]).ravel()
    s = series(np.tile([2.0, 4.0], 2) + noise, period=2)
    np.testing.assert_allclose(day_average(s), [2.0, 4.0])
    assert not is_periodic(s)


def test_time_series_rejects_non_finite_and_empty_values():
    with pytest.raises(ValidationError):
        TimeSeries(values=[1.0, np.nan])
    with pytest.raises(ValidationError):
        TimeSeries(values=[])


def test_time_series_values_are_read_only():
    s = series([1.0, 2.0])
    with pytest.raises(ValueError):
        s.values[0] = 5.0


def test_exogenous_requires_aligned_signals():
    with pytest.raises(ValidationError):
        Exogenous(price=series(np.ones(4), 2), irradiance=series(np.ones(6), 2), temperature=series(np.ones(4), 2))


def test_theta_vector_is_interleaved_per_battery():
    theta = VbTheta(p_bar=[1, 2], e_bar=[3, 4], e_lower=[-5, -6])
    assert_array_equal(theta.to_vector(), [1, 3, -5, 2, 4, -6])
    assert_array_equal(VbTheta.from_vector(theta.to_vector()).to_vector(), theta.to_vector())
    assert theta.n_batteries == 2


def test_theta_projection_clips_to_the_feasible_orthant():
    theta = VbTheta.from_vector([-1.0, -2.0, 3.0], project=True)
    assert theta.rows() == [(0.0, 0.0, 0.0)]
    with pytest.raises(ValidationError):
        VbTheta.from_vector([-1.0, 1.0, -1.0], project=False)


def test_tcl_params_valid_range():
    assert TclParams().valid_range() == pytest.approx((-3.0, 47.0))
    assert TclParams(a=1, b=1, c=-1, d=0, e=1, R=1, tau_in=22).valid_range() == pytest.approx((21.0, 23.0))
    with pytest.raises(ValidationError):
        TclParams(c=0.01)


def test_decomposition_total_and_slice():
    d = Decomposition(
        esl=series([1, -1, 1, -1], 2), pv=series([0, 2, 0, 2], 2),
        tcl=series([1, 1, 1, 1], 2), pl=series([5, 6, 5, 6], 2),
    )
    assert_array_equal(d.total.values, [7, 8, 7, 8])
    assert_array_equal(d.slice(2, 4).total.values, [7, 8])
    with pytest.raises(ValidationError):
        Decomposition(esl=series([1, 2]), pv=series([1]), tcl=series([1]), pl=series([1]))


def test_pv_sign_reporting():
    assert PvSign.CONSUMPTION_NEGATIVE.report(-0.04) == -0.04
    assert PvSign.GENERATION_POSITIVE.report(-0.04) == 0.04
