import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from epitrend.errors import InsufficientHistoryError, IntegrityError
from epitrend.probabilistic import (
    INTERIOR_LEVELS,
    QUANTILE_LEVELS,
    ScaledErrorHistory,
    assemble_quantile_forecast,
    baseline_quantiles_from_errors,
    collect_scaled_errors,
    estimate_interior_quantiles,
    extrapolate_tails,
    quantiles_from_history,
    rolling_week_mean,
)


def test_level_grid():
    assert len(QUANTILE_LEVELS) == 23
    assert QUANTILE_LEVELS[0] == 0.01
    assert QUANTILE_LEVELS[1] == 0.025
    assert QUANTILE_LEVELS[11] == 0.5
    assert QUANTILE_LEVELS[-1] == 0.99
    assert len(INTERIOR_LEVELS) == 19


class TestCollectScaledErrors:
    def _obs_and_forecasts(self, n=120, level=100.0, perturb=0.0):
        obs = np.full(n, level)
        forecasts = {t: level + perturb for t in range(n)}
        return obs, forecasts

    def test_perfect_forecasts_give_zero_errors(self):
        obs, forecasts = self._obs_and_forecasts()
        hist = collect_scaled_errors(forecasts, obs, h=7)
        np.testing.assert_allclose(hist.errors, 0.0)

    def test_scaling_by_sqrt_forecast(self):
        obs = np.full(120, 110.0)
        forecasts = {t: 100.0 for t in range(120)}
        hist = collect_scaled_errors(forecasts, obs, h=7)
        np.testing.assert_allclose(hist.errors, 1.0)  # 10 / sqrt(100)

    def test_zero_forecasts_are_skipped(self):
        obs = np.full(120, 50.0)
        forecasts = {t: 50.0 for t in range(110)}
        eligible = [t for t in range(110) if t + 7 + 3 <= 119]
        for t in eligible[-54:][:3]:
            forecasts[t] = 0.0
        hist = collect_scaled_errors(forecasts, obs, h=7, horizon_days=14)
        assert hist.window == 54
        assert hist.errors.size == 51

    def test_insufficient_history_raises(self):
        obs = np.full(30, 50.0)
        forecasts = {t: 50.0 for t in range(10)}
        with pytest.raises(InsufficientHistoryError):
            collect_scaled_errors(forecasts, obs, h=7)

    def test_rolling_mean_ground_truth(self):
        obs = np.arange(30.0)
        assert rolling_week_mean(obs, 10) == pytest.approx(10.0)
        with pytest.raises(InsufficientHistoryError):
            rolling_week_mean(obs, 1)

    def test_weekly_target_uses_week_sums(self):
        obs = np.full(120, 10.0)
        forecasts = {t: 70.0 for t in range(113)}
        hist = collect_scaled_errors(forecasts, obs, h=1, weekly=True, week_index=1)
        np.testing.assert_allclose(hist.errors, 0.0)


class TestInteriorQuantiles:
    def test_symmetric_errors_straddle_zero(self):
        errors = np.tile([-1.0, 0.0, 1.0], 10)
        hist = ScaledErrorHistory(7, errors, window=54)
        q = estimate_interior_quantiles(hist)
        assert q[0] < 0 < q[18]
        assert q[9] == 0.0

    def test_constant_errors_collapse_to_zero(self):
        hist = ScaledErrorHistory(7, np.full(30, 3.0), window=54)
        np.testing.assert_allclose(estimate_interior_quantiles(hist), 0.0)

    def test_linear_interpolation_of_order_statistics(self):
        hist = ScaledErrorHistory(7, np.arange(1.0, 101.0), window=200)
        q = estimate_interior_quantiles(hist)
        # pre-shift values 25.75 and 50.5 at levels 0.25 and 0.5
        assert q[4] == pytest.approx(25.75 - 50.5, rel=1e-12)
        assert q[9] == 0.0

    def test_short_history_raises(self):
        hist = ScaledErrorHistory(7, np.ones(5), window=54)
        with pytest.raises(InsufficientHistoryError):
            estimate_interior_quantiles(hist)


class TestTailExtrapolation:
    def test_exponential_interior_recovers_exact_tails(self):
        interior = -np.log(1.0 - INTERIOR_LEVELS)
        tails = extrapolate_tails(interior)
        assert tails[2] == pytest.approx(-math.log(0.025), abs=1e-12)
        assert tails[3] == pytest.approx(-math.log(0.01), abs=1e-12)
        assert tails[2] == pytest.approx(3.68888, abs=1e-3)

    def test_flat_interior_gives_flat_tails(self):
        interior = np.full(19, 2.0)
        np.testing.assert_allclose(extrapolate_tails(interior), 2.0)

    def test_symmetric_interior_gives_symmetric_tails(self):
        interior = np.linspace(-2.0, 2.0, 19)
        tails = extrapolate_tails(interior)
        assert tails[0] == pytest.approx(-tails[3], rel=1e-12)
        assert tails[1] == pytest.approx(-tails[2], rel=1e-12)

    def test_non_monotone_interior_is_rejected(self):
        interior = np.zeros(19)
        interior[5] = -1.0
        with pytest.raises(IntegrityError):
            extrapolate_tails(interior)


class TestAssemble:
    def _scaled(self, values_by_level):
        q = np.zeros(23)
        for level, value in values_by_level.items():
            q[int(np.argmin(np.abs(QUANTILE_LEVELS - level)))] = value
        return q

    def test_direct_formula(self):
        q_tilde = np.linspace(-1.0, 1.0, 23)
        q_tilde -= q_tilde[11]
        qf = assemble_quantile_forecast(100.0, q_tilde)
        idx_75 = int(np.argmin(np.abs(QUANTILE_LEVELS - 0.75)))
        expected = 100.0 + q_tilde[idx_75] * 10.0
        assert qf.quantiles[idx_75] == pytest.approx(expected, rel=1e-12)
        assert qf.point == 100.0
        assert qf.quantiles[11] == 100.0

    def test_zero_point_gives_all_zero(self):
        q_tilde = np.linspace(-2.0, 2.0, 23)
        q_tilde -= q_tilde[11]
        qf = assemble_quantile_forecast(0.0, q_tilde)
        np.testing.assert_allclose(qf.quantiles, 0.0)

    def test_floor_binds_at_low_levels(self):
        q_tilde = np.concatenate(([-15.0], np.zeros(22)))
        qf = assemble_quantile_forecast(100.0, q_tilde)
        assert qf.quantiles[0] == 0.0  # max(0, 100 - 150)

    def test_non_monotone_scaled_input_is_rejected(self):
        q_tilde = np.zeros(23)
        q_tilde[5] = -1.0
        with pytest.raises(IntegrityError):
            assemble_quantile_forecast(10.0, q_tilde)

    def test_nonzero_scaled_median_is_rejected(self):
        q_tilde = np.full(23, 1.0)
        with pytest.raises(IntegrityError):
            assemble_quantile_forecast(10.0, q_tilde)

    @given(st.floats(0.1, 1e4), st.floats(0.1, 10.0))
    @settings(max_examples=50, deadline=None)
    def test_monotone_and_median_coherent(self, point, spread):
        q_tilde = np.linspace(-spread, spread, 23)
        q_tilde -= q_tilde[11]
        qf = assemble_quantile_forecast(point, q_tilde)
        assert (np.diff(qf.quantiles) >= 0).all()
        assert qf.quantiles[11] == pytest.approx(point, rel=1e-12)

    def test_scale_equivariance_of_shifted_quantiles(self, rng):
        errors = rng.normal(0, 1, 60)
        hist1 = ScaledErrorHistory(7, errors, window=60)
        hist3 = ScaledErrorHistory(7, errors * 3.0, window=60)
        q1 = estimate_interior_quantiles(hist1)
        q3 = estimate_interior_quantiles(hist3)
        np.testing.assert_allclose(q3, 3.0 * q1, rtol=1e-9, atol=1e-12)


class TestEndToEnd:
    def test_perfect_weekly_history_collapses_to_point(self):
        obs = np.full(120, 10.0)
        forecasts = {t: 70.0 for t in range(113)}
        hist = collect_scaled_errors(forecasts, obs, h=1, weekly=True, week_index=1)
        qf = quantiles_from_history(70.0, hist, target_type="weekly_total", target_step=1)
        np.testing.assert_allclose(qf.quantiles, 70.0)

    def test_weekly_quantile_formula(self):
        q_tilde = np.zeros(23)
        q_tilde[20] = 2.0  # level 0.95
        q_tilde[21] = 2.0
        q_tilde[22] = 2.0
        qf = assemble_quantile_forecast(700.0, q_tilde, target_type="weekly_total")
        assert qf.quantiles[20] == pytest.approx(700.0 + 2.0 * math.sqrt(700.0), rel=1e-12)
        assert qf.quantiles[20] == pytest.approx(752.9, abs=0.1)


class TestBaselineQuantiles:
    def test_zero_errors_collapse_to_point(self):
        qf = baseline_quantiles_from_errors(100.0, np.zeros(20))
        np.testing.assert_allclose(qf.quantiles, 100.0)

    def test_symmetrization_forces_median_zero(self):
        qf = baseline_quantiles_from_errors(100.0, np.full(20, 10.0))
        assert qf.point == 100.0
        assert qf.quantiles[11] == 100.0
        assert qf.quantiles[0] < 100.0 < qf.quantiles[22]

    def test_type_seven_quantile_of_symmetrized_set(self):
        # {2,4,6} mirrored is {-6,-4,-2,2,4,6}; its 0.75 quantile by linear
        # interpolation of order statistics is 2 + 0.75 * 2 = 3.5
        qf = baseline_quantiles_from_errors(100.0, np.array([2.0, 4.0, 6.0]), min_history=3)
        idx_75 = int(np.argmin(np.abs(QUANTILE_LEVELS - 0.75)))
        assert qf.quantiles[idx_75] == pytest.approx(103.5, rel=1e-12)
        assert 102.0 < qf.quantiles[idx_75] <= 104.0

    def test_insufficient_history_raises(self):
        with pytest.raises(InsufficientHistoryError):
            baseline_quantiles_from_errors(10.0, np.ones(3))
