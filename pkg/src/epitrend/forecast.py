"""Trend extrapolation and the constant-week baseline.

A rising or flat trend tail is continued linearly (which avoids overshooting
a saturating wave); a falling tail is continued geometrically, i.e. linearly
in log scale, which avoids undershooting toward zero.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._validation import as_series, check_positive_int
from .errors import InsufficientHistoryError

__all__ = [
    "PointForecast",
    "WeeklyTarget",
    "extrapolate",
    "weekly_totals",
    "weekly_total_forecast",
    "baseline_forecast",
]


@dataclass
class PointForecast:
    """Daily point forecast for horizons 1..H from a given origin index."""

    origin_index: int
    horizon: int
    values: np.ndarray
    scale_mode: str  # "linear" or "log"

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.horizon,):
            raise ValueError("values must have length equal to the horizon")
        if self.scale_mode not in ("linear", "log"):
            raise ValueError(f"scale_mode must be linear or log, got {self.scale_mode!r}")
        if np.any(self.values < 0) or not np.isfinite(self.values).all():
            raise ValueError("forecast values must be finite and non-negative")

    def at(self, h: int) -> float:
        """Forecast value for horizon ``h`` (1-based)."""
        return float(self.values[h - 1])


@dataclass
class WeeklyTarget:
    week_index: int
    total: float

    def __post_init__(self):
        if self.week_index not in (1, 2):
            raise ValueError(f"week_index must be 1 or 2, got {self.week_index}")
        if self.total < 0:
            raise ValueError("weekly total must be non-negative")


def extrapolate(trend, anchor: int = -1, H: int = 14, slope_window: int = 7) -> PointForecast:
    """Continue a trend ``H`` days past ``anchor``, preserving its last slope.

    The slope is the difference quotient over the final ``slope_window``
    days. Non-negative slopes extrapolate linearly; negative slopes decay
    geometrically with the per-day ratio (tail/start)^(1/w). Outputs are
    floored at zero.
    """
    tau = getattr(trend, "values", trend)
    covered_start = getattr(trend, "covered_start", 0)
    if anchor != -1 and anchor < covered_start:
        raise ValueError("anchor precedes the covered part of the trend")
    tau = tau[covered_start : None if anchor == -1 else anchor + 1]
    tau = as_series(tau, "trend")
    w = check_positive_int(slope_window, "slope_window")
    H = check_positive_int(H, "H")
    if tau.size < w + 1:
        raise InsufficientHistoryError(
            f"need at least slope_window + 1 = {w + 1} trend values, got {tau.size}"
        )
    last = float(tau[-1])
    ref = float(tau[-1 - w])
    slope = (last - ref) / w
    h = np.arange(1, H + 1, dtype=float)
    if slope >= 0.0:
        values = np.maximum(last + slope * h, 0.0)
        mode = "linear"
    elif ref <= 0.0:
        # unreachable for non-negative trends (a negative slope needs ref > last >= 0)
        values = np.maximum(last + slope * h, 0.0)
        mode = "linear"
    else:
        ratio = (last / ref) ** (1.0 / w)
        values = last * ratio**h
        mode = "log"
    origin = anchor if anchor >= 0 else covered_start + tau.size - 1
    return PointForecast(origin_index=origin, horizon=H, values=values, scale_mode=mode)


def weekly_totals(daily, t: int, k: int) -> WeeklyTarget:
    """Observed total of target week ``k`` after origin ``t``.

    Week k covers days t + 1 + 7*(k-1) .. t + 7*k inclusive.
    """
    if k not in (1, 2):
        raise ValueError(f"only weeks 1 and 2 are supported, got k={k}")
    arr = as_series(daily, "daily")
    lo = t + 1 + 7 * (k - 1)
    hi = t + 7 * k
    if t < 0 or hi > arr.size - 1:
        raise InsufficientHistoryError(
            f"week {k} after origin {t} needs data through index {hi}, have {arr.size - 1}"
        )
    return WeeklyTarget(week_index=k, total=float(arr[lo : hi + 1].sum()))


def weekly_total_forecast(forecast: PointForecast, k: int) -> WeeklyTarget:
    """Forecast total of target week ``k``, summed from the daily forecast."""
    if k not in (1, 2):
        raise ValueError(f"only weeks 1 and 2 are supported, got k={k}")
    if forecast.horizon < 7 * k:
        raise InsufficientHistoryError(
            f"week {k} needs a horizon of {7 * k} days, forecast has {forecast.horizon}"
        )
    total = float(forecast.values[7 * (k - 1) : 7 * k].sum())
    return WeeklyTarget(week_index=k, total=total)


def baseline_forecast(series, t: int, H: int = 14) -> PointForecast:
    """Constant forecast at the mean of the week ending at ``t``.

    The implied total for the following week equals the last observed weekly
    total, which is the reference all relative scores compare against.
    """
    values = getattr(series, "values", series)
    arr = as_series(values, "series")
    H = check_positive_int(H, "H")
    if t < 0:
        t = arr.size - 1
    if t + 1 < 10:
        raise InsufficientHistoryError(
            f"baseline needs at least 10 observations up to the origin, got {t + 1}"
        )
    level = max(float(arr[t - 6 : t + 1].mean()), 0.0)
    return PointForecast(
        origin_index=t, horizon=H, values=np.full(H, level), scale_mode="linear"
    )
