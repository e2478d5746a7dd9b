"""Scikit-learn compatible wrappers around the functional pipeline.

These estimators operate on a single 1-D daily count series (a list, array,
or single-column matrix). They follow the sklearn parameter contract:
constructor arguments are stored verbatim, ``get_params``/``set_params``
work, and fitted state lives in trailing-underscore attributes, so the
pieces compose with ``sklearn.pipeline.Pipeline`` and can be cloned or
grid-searched.
"""

from __future__ import annotations

from datetime import date
from typing import Optional

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from ._validation import as_series
from .forecast import extrapolate
from .ingest import DailySeries, RegionKey
from .preprocess import preprocess_pipeline
from .smoothing import StlParams
from .trend import estimate_piecewise_trend

__all__ = ["SeriesCleaner", "PiecewiseTrendEstimator", "TrendForecaster"]

_DUMMY_REGION = RegionKey(country="series")
_DUMMY_START = date(2020, 1, 1)


def _to_daily_series(values) -> DailySeries:
    vals = [None if v is None else float(v) for v in np.asarray(values, dtype=float).ravel()]
    return DailySeries(region=_DUMMY_REGION, start_date=_DUMMY_START, values=vals)


class SeriesCleaner(BaseEstimator, TransformerMixin):
    """Transformer applying the count-cleaning chain to a daily series.

    Parameters
    ----------
    p_zero_threshold : float
        A zero is treated as a missing report when the probability of
        observing zero under the recent Poisson rate falls below this.
    min_run_for_imputation : int
        Shortest interior zero run eligible for redistribution.
    """

    def __init__(self, p_zero_threshold: float = 0.01, min_run_for_imputation: int = 1):
        self.p_zero_threshold = p_zero_threshold
        self.min_run_for_imputation = min_run_for_imputation

    def fit(self, X, y=None):
        clean = self._clean(X)
        self.anchor_ = clean.forecast_anchor
        self.provenance_ = [p.value for p in clean.provenance]
        self.n_observations_ = clean.values.size
        return self

    def transform(self, X):
        return self._clean(X).values

    def _clean(self, X):
        series = _to_daily_series(as_series(X, "X"))
        return preprocess_pipeline(
            series,
            p_zero_threshold=self.p_zero_threshold,
            min_run_for_imputation=self.min_run_for_imputation,
        )


class PiecewiseTrendEstimator(BaseEstimator, TransformerMixin):
    """Transformer extracting the robust piecewise trend of a count series.

    ``fit`` stores the trend and the outlier flags of the fitted series;
    ``transform`` smooths whatever series it is given. The input must
    already be cleaned (non-negative, dense); compose with
    :class:`SeriesCleaner` in a pipeline otherwise.
    """

    def __init__(
        self,
        window_days: int = 42,
        outlier_weight_threshold: float = 0.1,
        period: int = 7,
        seasonal_span: int = 11,
        trend_span: Optional[int] = None,
        n_inner: int = 2,
        n_outer: int = 5,
        max_windows: Optional[int] = None,
    ):
        self.window_days = window_days
        self.outlier_weight_threshold = outlier_weight_threshold
        self.period = period
        self.seasonal_span = seasonal_span
        self.trend_span = trend_span
        self.n_inner = n_inner
        self.n_outer = n_outer
        self.max_windows = max_windows

    def _stl_params(self) -> StlParams:
        return StlParams(
            period=self.period,
            seasonal_span=self.seasonal_span,
            trend_span=self.trend_span,
            n_inner=self.n_inner,
            n_outer=self.n_outer,
        )

    def _estimate(self, X):
        return estimate_piecewise_trend(
            as_series(X, "X"),
            L=self.window_days,
            stl_params=self._stl_params(),
            outlier_weight_threshold=self.outlier_weight_threshold,
            max_windows=self.max_windows,
        )

    def fit(self, X, y=None):
        est = self._estimate(X)
        self.trend_ = est.values
        self.outlier_mask_ = est.outlier_mask
        self.covered_start_ = est.covered_start
        return self

    def transform(self, X):
        return self._estimate(X).values


class TrendForecaster(BaseEstimator):
    """Point forecaster: clean, estimate the trend, extrapolate its slope.

    ``fit(y)`` ingests the raw daily series; ``predict()`` returns the daily
    point forecast for horizons 1..horizon_days past the last trusted
    observation. ``predict(horizon_days=n)`` overrides the horizon.
    """

    def __init__(
        self,
        horizon_days: int = 14,
        slope_window: int = 7,
        window_days: int = 42,
        outlier_weight_threshold: float = 0.1,
        p_zero_threshold: float = 0.01,
        min_run_for_imputation: int = 1,
        max_windows: Optional[int] = None,
    ):
        self.horizon_days = horizon_days
        self.slope_window = slope_window
        self.window_days = window_days
        self.outlier_weight_threshold = outlier_weight_threshold
        self.p_zero_threshold = p_zero_threshold
        self.min_run_for_imputation = min_run_for_imputation
        self.max_windows = max_windows

    def fit(self, y, X=None):
        clean = preprocess_pipeline(
            _to_daily_series(as_series(y, "y")),
            p_zero_threshold=self.p_zero_threshold,
            min_run_for_imputation=self.min_run_for_imputation,
        )
        est = estimate_piecewise_trend(
            clean,
            L=self.window_days,
            outlier_weight_threshold=self.outlier_weight_threshold,
            max_windows=self.max_windows,
        )
        self.trend_ = est.values
        self.outlier_mask_ = est.outlier_mask
        self.anchor_ = clean.forecast_anchor
        self.covered_start_ = est.covered_start
        return self

    def predict(self, horizon_days: Optional[int] = None):
        if not hasattr(self, "trend_"):
            raise RuntimeError("call fit before predict")
        H = self.horizon_days if horizon_days is None else horizon_days
        fc = extrapolate(
            self.trend_[self.covered_start_ :],
            H=H,
            slope_window=self.slope_window,
        )
        self.scale_mode_ = fc.scale_mode
        return fc.values
