import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from epitrend.trend import blend_overlap, blend_weights, estimate_piecewise_trend


class TestBlendOverlap:
    def test_sigmoid_constants_for_default_window(self):
        sigma = blend_weights(42)
        assert sigma[0] == pytest.approx(0.99577, abs=1e-5)
        assert sigma[20] == pytest.approx(0.01007, abs=1e-5)

    def test_constant_inputs_blend_to_the_constant(self):
        out = blend_overlap(np.full(21, 3.5), np.full(21, 3.5), L=42)
        np.testing.assert_allclose(out, 3.5, rtol=1e-12)

    def test_indicator_inputs_reveal_the_weights(self):
        out = blend_overlap(np.ones(21), np.zeros(21), L=42)
        np.testing.assert_allclose(out, blend_weights(42), rtol=1e-12)

    def test_length_mismatch_is_an_error(self):
        with pytest.raises(ValueError):
            blend_overlap(np.ones(20), np.ones(21), L=42)


class TestPiecewiseTrend:
    def test_constant_series_gives_constant_trend(self):
        est = estimate_piecewise_trend(np.full(126, 50.0))
        np.testing.assert_allclose(est.values, 50.0, atol=1e-6)
        assert not est.outlier_mask.any()

    def test_exponential_with_seasonality(self):
        t = np.arange(126)
        true_trend = 100.0 * np.exp(0.01 * t)
        y = true_trend * (1.0 + 0.08 * np.sin(2 * np.pi * t / 7))
        est = estimate_piecewise_trend(y)
        rel = np.abs(est.values[-42:] - true_trend[-42:]) / true_trend[-42:]
        assert rel.max() <= 0.05

    def test_backlog_spike_is_flagged_and_mass_conserved(self):
        t = np.arange(126)
        base = 100.0 * np.exp(0.01 * t) * (1.0 + 0.08 * np.sin(2 * np.pi * t / 7))
        spiked = base.copy()
        spiked[100] *= 20.0
        est_clean = estimate_piecewise_trend(base)
        est = estimate_piecewise_trend(spiked)
        assert est.outlier_mask[100]
        assert est.values.sum() == pytest.approx(spiked.sum(), rel=1e-9)
        ratio = est.values[100] / est_clean.values[100]
        assert 0.5 <= ratio <= 2.0

    def test_global_count_conservation_randomized(self, rng):
        for _ in range(60):
            n = int(rng.integers(20, 140))
            level = rng.uniform(1.0, 500.0)
            y = rng.poisson(level, size=n).astype(float)
            if rng.random() < 0.5 and n > 10:
                y[int(rng.integers(5, n - 1))] *= rng.uniform(5.0, 30.0)
            est = estimate_piecewise_trend(y)
            if y.sum() > 0:
                assert est.values.sum() == pytest.approx(y.sum(), rel=1e-9)
            assert (est.values >= 0).all()

    def test_determinism(self, rng):
        y = rng.poisson(80, size=100).astype(float)
        a = estimate_piecewise_trend(y).values
        b = estimate_piecewise_trend(y).values
        assert (a == b).all()

    def test_appending_a_day_leaves_old_trend_nearly_unchanged(self):
        # exact on a constant series, approximate on smooth growth
        const = np.full(150, 80.0)
        before = estimate_piecewise_trend(const).values
        after = estimate_piecewise_trend(np.append(const, 80.0)).values
        np.testing.assert_allclose(after[:150 - 63], before[: 150 - 63], atol=1e-9)

        t = np.arange(150)
        smooth = 100.0 * np.exp(0.005 * t)
        b2 = estimate_piecewise_trend(smooth).values
        a2 = estimate_piecewise_trend(np.append(smooth, 100.0 * np.exp(0.005 * 150))).values
        old = slice(0, 150 - 63)
        assert (np.abs(a2[old] - b2[old]) / b2[old]).max() <= 0.02

    def test_no_seam_artifacts_on_smooth_input(self):
        t = np.arange(168)
        y = 100.0 * np.exp(0.01 * t)
        est = estimate_piecewise_trend(y)
        steps = np.abs(np.diff(est.values))
        # seams sit at multiples of L/2 from the end; steps there should not
        # exceed the largest ordinary one-day step
        interior_max = steps.max()
        for seam in range(168 - 21, 21, -21):
            assert steps[seam - 1] <= 1.5 * interior_max

    def test_short_series_degenerate_path(self):
        y = np.full(30, 12.0)
        est = estimate_piecewise_trend(y, L=42)
        assert est.degenerate
        assert est.values.sum() == pytest.approx(y.sum(), rel=1e-9)

    def test_all_zero_series(self):
        est = estimate_piecewise_trend(np.zeros(126))
        np.testing.assert_allclose(est.values, 0.0)

    def test_tail_mode_matches_full_mode_near_the_end(self):
        t = np.arange(210)
        y = 100.0 * np.exp(0.01 * t) * (1.0 + 0.05 * np.sin(2 * np.pi * t / 7))
        full = estimate_piecewise_trend(y)
        tail = estimate_piecewise_trend(y, max_windows=2)
        assert tail.covered_start == 210 - 63
        assert np.isnan(tail.values[: tail.covered_start]).all()
        last = slice(210 - 21, 210)
        rel = np.abs(tail.values[last] - full.values[last]) / full.values[last]
        assert rel.max() <= 0.01

    def test_rejects_negative_input(self):
        with pytest.raises(ValueError):
            estimate_piecewise_trend(np.array([1.0, -2.0] + [3.0] * 60))

    def test_rejects_odd_window(self):
        with pytest.raises(ValueError):
            estimate_piecewise_trend(np.ones(100), L=41)

    @given(st.integers(42, 120), st.floats(10.0, 400.0))
    @settings(max_examples=25, deadline=None)
    def test_conservation_property(self, n, level):
        rng = np.random.default_rng(n)
        y = rng.poisson(level, size=n).astype(float)
        est = estimate_piecewise_trend(y)
        if y.sum() > 0:
            assert abs(est.values.sum() - y.sum()) <= 1e-9 * y.sum()
        assert (est.values >= 0).all()
