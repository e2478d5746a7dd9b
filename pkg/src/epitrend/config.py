"""Pipeline configuration: every tunable parameter in one flat namespace.

Values can be loaded from a flat TOML file (``key = value`` pairs, no
nesting) so a backtest run records exactly which constants produced it.
"""

from __future__ import annotations

import sys
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Optional

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .smoothing import StlParams

__all__ = ["PipelineConfig", "load_config"]


@dataclass
class PipelineConfig:
    # preprocessing
    p_zero_threshold: float = 0.01
    min_run_for_imputation: int = 1
    # decomposition
    period: int = 7
    seasonal_span: int = 11
    seasonal_degree: int = 1
    trend_span: Optional[int] = None
    trend_degree: int = 1
    lowpass_span: Optional[int] = None
    lowpass_degree: int = 1
    n_inner: int = 2
    n_outer: int = 5
    # piecewise trend
    window_days: int = 42
    outlier_weight_threshold: float = 0.1
    # forecasting
    slope_window: int = 7
    horizon_days: int = 14
    # probabilistic
    error_window_offset: int = 40  # error history window is this + horizon_days
    min_history: int = 15
    # evaluation
    wis_normalized: bool = False
    # screening
    mad_window: int = 22
    min_reporting_fraction: float = 0.70
    max_gap_days: int = 5
    n_exclude_outliers: int = 20
    # risk map
    min_tests_per_million: float = 10_000.0
    green_incidence_max: float = 30.0
    r_eff_descending: float = 0.9
    # backtest speed/fidelity trade-off: windows per trend fit (None = all)
    max_windows: Optional[int] = 2

    def stl_params(self) -> StlParams:
        return StlParams(
            period=self.period,
            seasonal_span=self.seasonal_span,
            seasonal_degree=self.seasonal_degree,
            trend_span=self.trend_span,
            trend_degree=self.trend_degree,
            lowpass_span=self.lowpass_span,
            lowpass_degree=self.lowpass_degree,
            n_inner=self.n_inner,
            n_outer=self.n_outer,
        )

    def to_dict(self) -> dict:
        return asdict(self)


def load_config(path) -> PipelineConfig:
    """Read a flat TOML file, rejecting unknown keys."""
    data = tomllib.loads(Path(path).read_text(encoding="utf-8"))
    known = {f.name for f in fields(PipelineConfig)}
    unknown = set(data) - known
    if unknown:
        raise ValueError(f"unknown config keys: {', '.join(sorted(unknown))}")
    return PipelineConfig(**data)
