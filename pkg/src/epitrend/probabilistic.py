"""Predictive quantiles from retrospective forecast errors.

The 19 interior levels 0.05..0.95 come from empirical quantiles of recent
forecast deviations scaled by the square root of the forecast (a Poisson
variance proxy); the four extreme levels are extrapolated with a
one-parameter exponential tail fitted to the two outermost interior
quantiles on each side. All scaled quantiles are shifted so the median
correction is exactly zero, then mapped back through
q = point + q_scaled * sqrt(point), floored at zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

from .errors import IntegrityError, InsufficientHistoryError
from .ingest import RegionKey

__all__ = [
    "QUANTILE_LEVELS",
    "INTERIOR_LEVELS",
    "QuantileForecast",
    "ScaledErrorHistory",
    "rolling_week_mean",
    "collect_scaled_errors",
    "estimate_interior_quantiles",
    "extrapolate_tails",
    "assemble_quantile_forecast",
    "quantiles_from_history",
    "baseline_quantiles_from_errors",
]

INTERIOR_LEVELS: np.ndarray = np.round(np.arange(1, 20) * 0.05, 2)
QUANTILE_LEVELS: np.ndarray = np.round(
    np.concatenate(([0.01, 0.025], INTERIOR_LEVELS, [0.975, 0.99])), 3
)
_MEDIAN_IDX = 11  # position of level 0.5 in QUANTILE_LEVELS

DEFAULT_MIN_HISTORY = 15
DEFAULT_WINDOW_OFFSET = 40  # error window length is this plus the horizon


@dataclass
class QuantileForecast:
    """23 predictive quantiles plus the point forecast for one target."""

    target_type: str  # "daily_mean" or "weekly_total"
    target_step: int  # horizon in days, or week index
    point: float
    quantiles: np.ndarray
    region: Optional[RegionKey] = None
    kind: str = "cases"
    levels: np.ndarray = field(default_factory=lambda: QUANTILE_LEVELS.copy())

    def __post_init__(self):
        self.quantiles = np.asarray(self.quantiles, dtype=float)
        if self.target_type not in ("daily_mean", "weekly_total"):
            raise ValueError(f"unknown target_type {self.target_type!r}")
        if self.quantiles.shape != (23,):
            raise IntegrityError("expected exactly 23 quantiles")
        if not np.isfinite(self.quantiles).all() or self.quantiles.min() < 0:
            raise IntegrityError("quantiles must be finite and non-negative")
        if np.any(np.diff(self.quantiles) < 0):
            raise IntegrityError("quantiles must be non-decreasing in the level")
        if not math.isclose(self.quantiles[_MEDIAN_IDX], self.point, rel_tol=1e-12, abs_tol=1e-12):
            raise IntegrityError("median quantile must equal the point forecast")

    def interval(self, alpha: float) -> tuple[float, float]:
        """Central interval [q_alpha, q_(1-alpha)]."""
        i = int(np.argmin(np.abs(self.levels - alpha)))
        return float(self.quantiles[i]), float(self.quantiles[22 - i])


@dataclass
class ScaledErrorHistory:
    horizon: int
    errors: np.ndarray
    window: int

    def __post_init__(self):
        self.errors = np.asarray(self.errors, dtype=float)
        if self.errors.size > self.window:
            raise ValueError("history exceeds its window")
        if self.errors.size and not np.isfinite(self.errors).all():
            raise ValueError("errors must be finite")


def rolling_week_mean(values: np.ndarray, idx: int) -> float:
    """Centered 7-day mean around ``idx``; needs 3 days on each side."""
    if idx - 3 < 0 or idx + 3 >= len(values):
        raise InsufficientHistoryError(f"rolling mean at {idx} needs 3 days on each side")
    return float(np.asarray(values[idx - 3 : idx + 4], dtype=float).mean())


def collect_scaled_errors(
    retro_forecasts: Mapping[int, float],
    observations,
    h: int,
    *,
    horizon_days: int = 14,
    min_history: int = DEFAULT_MIN_HISTORY,
    window_offset: int = DEFAULT_WINDOW_OFFSET,
    weekly: bool = False,
    week_index: int = 1,
) -> ScaledErrorHistory:
    """Scaled deviations of past forecasts from what was later observed.

    ``retro_forecasts`` maps past origin indices to the forecast value for
    the requested target (daily horizon ``h``, or week ``week_index`` when
    ``weekly``). The most recent ``window_offset + horizon_days`` origins
    with a computable ground truth enter; origins with a zero forecast are
    skipped. Ground truth is the centered 7-day rolling mean for daily
    targets and the 7-day-ahead sum for weekly ones.
    """
    obs = np.asarray(observations, dtype=float)
    n = obs.size
    window = window_offset + horizon_days

    usable: list[int] = []
    for t in sorted(retro_forecasts):
        if weekly:
            truth_end = t + 7 * week_index
        else:
            truth_end = t + h + 3
        if 0 <= t and truth_end <= n - 1:
            usable.append(t)
    usable = usable[-window:]

    errors = []
    skipped = 0
    for t in usable:
        f = float(retro_forecasts[t])
        if f <= 0.0:
            skipped += 1
            continue
        if weekly:
            lo = t + 1 + 7 * (week_index - 1)
            truth = float(obs[lo : lo + 7].sum())
        else:
            truth = rolling_week_mean(obs, t + h)
        errors.append((truth - f) / math.sqrt(f))
    if len(errors) < min_history:
        raise InsufficientHistoryError(
            f"{len(errors)} usable origins (of {len(usable)}, {skipped} skipped), "
            f"need {min_history}"
        )
    return ScaledErrorHistory(horizon=h, errors=np.array(errors), window=window)


def estimate_interior_quantiles(history: ScaledErrorHistory, min_history: int = DEFAULT_MIN_HISTORY) -> np.ndarray:
    """Empirical quantiles of the scaled errors at the 19 interior levels.

    Linear interpolation of order statistics, then a constant shift so the
    0.5 quantile is exactly zero (the point forecast is trusted as median).
    """
    if history.errors.size < min_history:
        raise InsufficientHistoryError(
            f"history has {history.errors.size} entries, need {min_history}"
        )
    q = np.quantile(history.errors, INTERIOR_LEVELS)
    return q - q[9]


def extrapolate_tails(interior) -> np.ndarray:
    """Exponential-tail quantiles at levels 0.01, 0.025, 0.975, 0.99.

    The upper scale is fitted from the 0.90/0.95 quantile gap, theta =
    (q95 - q90) / ln 2, giving q_(1-a) = q95 + theta * ln(0.05 / a); the
    lower tail mirrors it from the 0.05/0.10 gap. Scales are floored at
    zero, which degenerates to a flat tail.
    """
    q = np.asarray(interior, dtype=float)
    if q.shape != (19,):
        raise ValueError("expected the 19 interior quantiles")
    if np.any(np.diff(q) < 0):
        raise IntegrityError("interior quantiles must be non-decreasing")
    ln2 = math.log(2.0)
    theta_hi = max((q[18] - q[17]) / ln2, 0.0)
    theta_lo = max((q[1] - q[0]) / ln2, 0.0)
    upper_975 = q[18] + theta_hi * math.log(0.05 / 0.025)
    upper_990 = q[18] + theta_hi * math.log(0.05 / 0.01)
    lower_025 = q[0] - theta_lo * math.log(0.05 / 0.025)
    lower_010 = q[0] - theta_lo * math.log(0.05 / 0.01)
    return np.array([lower_010, lower_025, upper_975, upper_990])


def _full_scaled_vector(interior: np.ndarray) -> np.ndarray:
    tails = extrapolate_tails(interior)
    return np.concatenate((tails[:2], interior, tails[2:]))


def assemble_quantile_forecast(
    point: float,
    scaled_quantiles,
    *,
    target_type: str = "daily_mean",
    target_step: int = 1,
    region: Optional[RegionKey] = None,
    kind: str = "cases",
) -> QuantileForecast:
    """Map shifted scaled quantiles onto a point forecast.

    q_level = max(0, point + q_scaled * sqrt(point)). The scaled vector must
    be monotone with a zero median entry.
    """
    q_tilde = np.asarray(scaled_quantiles, dtype=float)
    if q_tilde.shape != (23,):
        raise IntegrityError("expected 23 scaled quantiles")
    if np.any(np.diff(q_tilde) < 0):
        raise IntegrityError("scaled quantiles must be non-decreasing")
    if abs(q_tilde[_MEDIAN_IDX]) > 1e-9:
        raise IntegrityError("scaled median must be zero")
    if point < 0:
        raise ValueError("point forecast must be non-negative")
    q = np.maximum(point + q_tilde * math.sqrt(point), 0.0)
    q[_MEDIAN_IDX] = point
    return QuantileForecast(
        target_type=target_type,
        target_step=target_step,
        point=float(point),
        quantiles=q,
        region=region,
        kind=kind,
    )


def quantiles_from_history(
    point: float,
    history: ScaledErrorHistory,
    *,
    target_type: str = "daily_mean",
    target_step: int = 1,
    region: Optional[RegionKey] = None,
    kind: str = "cases",
    min_history: int = DEFAULT_MIN_HISTORY,
) -> QuantileForecast:
    """Full chain: interior quantiles, tail extrapolation, assembly."""
    interior = estimate_interior_quantiles(history, min_history)
    return assemble_quantile_forecast(
        point,
        _full_scaled_vector(interior),
        target_type=target_type,
        target_step=target_step,
        region=region,
        kind=kind,
    )


def baseline_quantiles_from_errors(
    point: float,
    errors,
    *,
    target_step: int = 1,
    region: Optional[RegionKey] = None,
    kind: str = "cases",
    min_history: int = DEFAULT_MIN_HISTORY,
) -> QuantileForecast:
    """Baseline predictive quantiles from symmetrized past weekly errors.

    The error set is mirrored around zero, its empirical quantiles at all 23
    levels are added to the baseline point, and results are floored at zero.
    The mirroring forces a zero median, so the point forecast is the median.
    """
    e = np.asarray(errors, dtype=float)
    if e.size < min_history:
        raise InsufficientHistoryError(f"{e.size} baseline errors, need {min_history}")
    symmetric = np.concatenate((e, -e))
    q = np.maximum(point + np.quantile(symmetric, QUANTILE_LEVELS), 0.0)
    q[_MEDIAN_IDX] = point
    return QuantileForecast(
        target_type="weekly_total",
        target_step=target_step,
        point=float(point),
        quantiles=q,
        region=region,
        kind=kind,
    )
