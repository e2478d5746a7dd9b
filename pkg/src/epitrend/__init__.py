"""Robust trend estimation and short-term forecasting for daily count series."""

from .config import PipelineConfig, load_config
from .estimators import PiecewiseTrendEstimator, SeriesCleaner, TrendForecaster
from .forecast import PointForecast, baseline_forecast, extrapolate
from .ingest import DailySeries, RegionKey, parse_jhu_wide, parse_long, write_hub_quantiles
from .preprocess import CleanSeries, preprocess_pipeline
from .probabilistic import QUANTILE_LEVELS, QuantileForecast
from .smoothing import LoessConfig, StlParams, loess_fit, stl_decompose
from .trend import TrendEstimate, blend_overlap, estimate_piecewise_trend

__version__ = "0.1.0"

__all__ = [
    "PipelineConfig",
    "load_config",
    "SeriesCleaner",
    "PiecewiseTrendEstimator",
    "TrendForecaster",
    "PointForecast",
    "baseline_forecast",
    "extrapolate",
    "DailySeries",
    "RegionKey",
    "parse_jhu_wide",
    "parse_long",
    "write_hub_quantiles",
    "CleanSeries",
    "preprocess_pipeline",
    "QUANTILE_LEVELS",
    "QuantileForecast",
    "LoessConfig",
    "StlParams",
    "loess_fit",
    "stl_decompose",
    "TrendEstimate",
    "blend_overlap",
    "estimate_piecewise_trend",
    "__version__",
]
