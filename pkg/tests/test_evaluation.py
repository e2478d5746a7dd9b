import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from epitrend.errors import IntegrityError
from epitrend.evaluation import (
    WIS_ALPHAS,
    absolute_error,
    aggregate_scores,
    growth_rate_stratification,
    growth_rates_from_weekly,
    interval_score,
    relative_scores,
    total_coverage,
    wis,
)
from epitrend.probabilistic import QUANTILE_LEVELS


def monotone_quantiles(center=100.0, spread=10.0):
    return center + spread * np.linspace(-1.0, 1.0, 23)


class TestAbsoluteError:
    def test_cases(self):
        assert absolute_error(100.0, 110.0) == 10.0
        assert absolute_error(42.0, 42.0) == 0.0
        assert absolute_error(0.0, 70.0) == 70.0


class TestIntervalScore:
    def test_inside_interval_scores_the_width(self):
        assert interval_score(10.0, 20.0, 0.2, 15.0) == 10.0

    def test_above_interval(self):
        assert interval_score(10.0, 20.0, 0.2, 25.0) == 60.0

    def test_below_interval(self):
        assert interval_score(10.0, 20.0, 0.5, 8.0) == 18.0

    def test_bad_interval_is_an_error(self):
        with pytest.raises(ValueError):
            interval_score(20.0, 10.0, 0.2, 15.0)

    @given(st.floats(-50.0, 150.0))
    @settings(max_examples=80, deadline=None)
    def test_piecewise_linear_and_continuous_in_xi(self, xi):
        eps = 1e-6
        left = interval_score(10.0, 20.0, 0.2, xi - eps)
        mid = interval_score(10.0, 20.0, 0.2, xi)
        right = interval_score(10.0, 20.0, 0.2, xi + eps)
        assert abs(mid - 0.5 * (left + right)) <= 20.0 * eps


class TestWis:
    def test_eleven_levels(self):
        np.testing.assert_allclose(
            WIS_ALPHAS, [0.01, 0.025, 0.05, 0.10, 0.15, 0.20, 0.25, 0.30, 0.35, 0.40, 0.45]
        )

    def test_no_penalty_case_sums_weighted_widths(self):
        q = monotone_quantiles()
        xi = q[11]
        expected = sum(a * (q[22 - k] - q[k]) for k, a in enumerate(WIS_ALPHAS))
        assert wis(q, xi) == pytest.approx(expected, rel=1e-12)

    def test_degenerate_forecast_on_target_scores_zero(self):
        q = np.full(23, 55.0)
        assert wis(q, 55.0) == 0.0

    def test_degenerate_forecast_off_target_penalty_algebra(self):
        # each of the 11 intervals contributes alpha * (2/(2 alpha)) * d = d,
        # so WIS = d + 11 d = 12 d
        q = np.full(23, 50.0)
        d = 3.7
        assert wis(q, 50.0 + d) == pytest.approx(12.0 * d, rel=1e-12)

    def test_normalized_variant(self):
        q = np.full(23, 50.0)
        assert wis(q, 53.0, normalized=True) == pytest.approx(36.0 / 11.5, rel=1e-12)

    def test_non_monotone_is_rejected(self):
        q = monotone_quantiles()
        q[3] = q[2] - 5.0
        with pytest.raises(IntegrityError):
            wis(q, 100.0)

    def test_wis_is_nonnegative(self, rng):
        for _ in range(100):
            q = np.sort(rng.normal(0, 10, 23))
            xi = rng.normal(0, 30)
            assert wis(q, xi) >= 0.0


class TestTotalCoverage:
    def test_below_everything_is_zero(self):
        q = monotone_quantiles()
        assert total_coverage(q, q[0] - 1.0) == 0

    def test_at_the_median_is_eleven(self):
        q = monotone_quantiles()
        assert total_coverage(q, q[11]) == 11

    def test_at_an_interior_quantile(self):
        # xi = q_0.30 sits inside intervals k = 1..8 of a strictly
        # increasing quantile vector and outside the three tighter ones
        q = monotone_quantiles()
        idx_30 = int(np.argmin(np.abs(QUANTILE_LEVELS - 0.30)))
        assert idx_30 == 7
        assert total_coverage(q, q[idx_30]) == 8

    def test_monotone_as_xi_leaves_the_center(self):
        q = monotone_quantiles()
        center = q[11]
        last = 11
        for step in np.linspace(0.0, 15.0, 40):
            cov = total_coverage(q, center + step)
            assert cov <= last
            last = cov


class TestAggregation:
    def test_single_origin(self):
        s = aggregate_scores([{"ae": 3.0, "wis": 5.0, "coverage": 7}])
        assert (s.mae, s.median_ae, s.mwis, s.mean_total_coverage) == (3.0, 3.0, 5.0, 7.0)
        assert s.n_origins == 1

    def test_mean_and_median(self):
        records = [{"ae": a, "wis": 1.0, "coverage": 5} for a in (1.0, 2.0, 9.0)]
        s = aggregate_scores(records)
        assert s.mae == pytest.approx(4.0)
        assert s.median_ae == pytest.approx(2.0)

    def test_empty_is_an_error(self):
        with pytest.raises(ValueError):
            aggregate_scores([])


class TestRelativeScores:
    def _score(self, mae=1.0, med=1.0, mwis=1.0, mc=5.0):
        from epitrend.evaluation import ScoreSet

        return ScoreSet(mae=mae, median_ae=med, mwis=mwis, mean_total_coverage=mc, n_origins=10)

    def test_quarter_improvement(self):
        rel = relative_scores(self._score(mae=7.5), self._score(mae=10.0))
        assert rel.rmae == pytest.approx(0.25)

    def test_equal_scores_give_zero(self):
        rel = relative_scores(self._score(), self._score())
        assert rel.rmae == 0.0
        assert rel.rwis == 0.0
        assert rel.rc == 0.0

    def test_coverage_sign_is_flipped(self):
        rel = relative_scores(self._score(mc=6.0), self._score(mc=5.0))
        assert rel.rc == pytest.approx(0.2)

    def test_zero_baseline_is_not_available(self):
        rel = relative_scores(self._score(), self._score(mae=0.0))
        assert rel.rmae is None


class TestGrowthRates:
    def test_constant_weekly_totals_have_zero_rate(self):
        rates = growth_rates_from_weekly(np.full(12, 700.0))
        np.testing.assert_allclose(rates, 0.0, atol=1e-6)

    def test_exponential_growth_rate(self):
        w = 100.0 * 1.05 ** np.arange(20)
        rates = growth_rates_from_weekly(w)
        expected = np.log(1.05)
        interior = rates[3:-3]
        assert np.all(np.abs(interior - expected) <= 0.2 * expected)

    def test_too_few_weeks_is_an_error(self):
        with pytest.raises(ValueError):
            growth_rates_from_weekly(np.ones(5))

    def test_stratification_buckets(self):
        samples = [(0.001, 0.1, 0.2)] * 5 + [(0.055, 0.05, 0.3)] * 5
        rows = growth_rate_stratification(samples)
        assert len(rows) == 2
        assert rows[0].bucket_lo == 0.0
        assert rows[1].bucket_lo == pytest.approx(0.05)
        assert rows[1].method_median == pytest.approx(0.05)
        assert rows[1].baseline_median == pytest.approx(0.3)

    def test_nan_rates_are_dropped(self):
        rows = growth_rate_stratification([(float("nan"), 1.0, 1.0), (0.01, 0.5, 0.6)])
        assert len(rows) == 1
