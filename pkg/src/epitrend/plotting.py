"""Static SVG charts: observations, trend, forecast, nested intervals."""

from __future__ import annotations

from datetime import timedelta
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

__all__ = ["plot_region_forecast"]

_INTERVAL_LEVELS = (0.05, 0.10, 0.25)  # shaded 90%, 80% and 50% bands


def plot_region_forecast(
    path,
    *,
    region_label: str,
    start_date,
    observed: np.ndarray,
    trend: np.ndarray,
    covered_start: int,
    forecast_values: np.ndarray,
    anchor: int,
    daily_quantiles=None,
    lookback_days: int = 120,
) -> Path:
    """Render one region's observed bars, trend line and forecast to SVG.

    ``daily_quantiles`` optionally maps interval levels alpha to
    (lower, upper) arrays over the forecast horizon, drawn as nested shaded
    bands.
    """
    path = Path(path)
    n = len(observed)
    lo = max(0, n - lookback_days)
    days = np.arange(lo, n)
    fdays = anchor + 1 + np.arange(len(forecast_values))

    fig, ax = plt.subplots(figsize=(9, 4.5))
    ax.bar(days, observed[lo:], width=0.8, color="#7fbf7f", label="observed")
    t_lo = max(lo, covered_start)
    ax.plot(np.arange(t_lo, n), trend[t_lo:n], color="#c0392b", lw=2, label="trend")
    ax.plot(fdays, forecast_values, color="#2b6cc0", lw=2, label="forecast")
    if daily_quantiles:
        shade = 0.12
        for alpha in sorted(daily_quantiles):
            lower, upper = daily_quantiles[alpha]
            ax.fill_between(fdays, lower, upper, color="#c0392b", alpha=shade, lw=0)
            shade += 0.08

    def _fmt_day(d, _pos=None):
        return (start_date + timedelta(days=int(d))).isoformat()

    ax.xaxis.set_major_formatter(plt.FuncFormatter(_fmt_day))
    fig.autofmt_xdate(rotation=30)
    ax.set_ylabel("daily count")
    ax.set_title(region_label)
    ax.legend(loc="upper left", frameon=False)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path
