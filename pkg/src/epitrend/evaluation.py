"""Scoring of point and probabilistic forecasts against a baseline.

Point forecasts are scored with absolute error against the centered 7-day
rolling mean (daily targets) or the plain weekly sum (weekly targets).
Probabilistic forecasts use the weighted interval score over the 11 nested
central intervals spanned by the 23 quantile levels, plus the total
coverage, i.e. how many of those intervals contain the realised value.
Relative scores express the improvement over the baseline as a fraction of
the baseline score.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy.interpolate import make_smoothing_spline

from .errors import IntegrityError
from .probabilistic import QUANTILE_LEVELS

__all__ = [
    "WIS_ALPHAS",
    "ScoreSet",
    "RelativeScores",
    "StratificationRow",
    "absolute_error",
    "interval_score",
    "wis",
    "total_coverage",
    "aggregate_scores",
    "relative_scores",
    "growth_rates_from_weekly",
    "growth_rate_stratification",
]

#: the K = 11 interval levels alpha_k (lower-tail probabilities) of the
#: 23-level quantile set
WIS_ALPHAS: np.ndarray = QUANTILE_LEVELS[:11].copy()


@dataclass
class ScoreSet:
    mae: float
    median_ae: float
    mwis: float
    mean_total_coverage: float
    n_origins: int

    def __post_init__(self):
        if self.n_origins < 1:
            raise ValueError("a score set needs at least one origin")
        if not 0.0 <= self.mean_total_coverage <= len(WIS_ALPHAS):
            raise ValueError("mean total coverage out of range")


@dataclass
class RelativeScores:
    """Positive entries mean the method improves on the baseline.

    Entries are ``None`` when the corresponding baseline score is zero.
    """

    rmae: Optional[float]
    rmedian_ae: Optional[float]
    rwis: Optional[float]
    rc: Optional[float]


def absolute_error(f: float, truth: float) -> float:
    if not (math.isfinite(f) and math.isfinite(truth)):
        raise ValueError("absolute error needs finite inputs")
    return abs(f - truth)


def interval_score(lower: float, upper: float, alpha: float, xi: float) -> float:
    """Width of [lower, upper] plus scaled penalties for missing ``xi``."""
    if lower > upper:
        raise ValueError(f"interval bounds out of order: [{lower}, {upper}]")
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    score = upper - lower
    if xi < lower:
        score += (2.0 / alpha) * (lower - xi)
    elif xi > upper:
        score += (2.0 / alpha) * (xi - upper)
    return score


def _quantile_values(quantiles) -> np.ndarray:
    q = np.asarray(getattr(quantiles, "quantiles", quantiles), dtype=float)
    if q.shape != (23,):
        raise ValueError("expected 23 quantiles")
    if np.any(np.diff(q) < 0):
        raise IntegrityError("quantiles must be non-decreasing")
    return q


def wis(quantiles, xi: float, normalized: bool = False) -> float:
    """Weighted interval score of a 23-quantile forecast at observation xi.

    WIS = |xi - q_0.5| + sum_k alpha_k * IS_{2 alpha_k}([q_k, q_{24-k}], xi)
    over the K = 11 interval levels. ``normalized`` divides by K + 1/2 for
    comparability with tools that use the normalised convention; the raw sum
    is the default.
    """
    q = _quantile_values(quantiles)
    score = abs(xi - q[11])
    for k, alpha in enumerate(WIS_ALPHAS):
        score += alpha * interval_score(q[k], q[22 - k], 2.0 * alpha, xi)
    if normalized:
        score /= len(WIS_ALPHAS) + 0.5
    return score


def total_coverage(quantiles, xi: float) -> int:
    """Number of the 11 nested central intervals containing ``xi``."""
    q = _quantile_values(quantiles)
    return int(sum(1 for k in range(11) if q[k] <= xi <= q[22 - k]))


def aggregate_scores(records: Sequence[dict]) -> ScoreSet:
    """Combine per-origin records with keys ae, wis, coverage."""
    if not records:
        raise ValueError("cannot aggregate an empty record list")
    ae = np.array([r["ae"] for r in records], dtype=float)
    w = np.array([r["wis"] for r in records], dtype=float)
    c = np.array([r["coverage"] for r in records], dtype=float)
    return ScoreSet(
        mae=float(ae.mean()),
        median_ae=float(np.median(ae)),
        mwis=float(w.mean()),
        mean_total_coverage=float(c.mean()),
        n_origins=len(records),
    )


def _relative(baseline: float, method: float) -> Optional[float]:
    if baseline <= 0.0:
        return None
    return (baseline - method) / baseline


def relative_scores(method: ScoreSet, baseline: ScoreSet) -> RelativeScores:
    """Improvement of the method over the baseline, per metric.

    Error metrics improve downward, coverage upward, so the coverage ratio
    is sign-flipped: rc = (MC_method - MC_baseline) / MC_baseline.
    """
    rc = None
    if baseline.mean_total_coverage > 0.0:
        rc = (method.mean_total_coverage - baseline.mean_total_coverage) / baseline.mean_total_coverage
    return RelativeScores(
        rmae=_relative(baseline.mae, method.mae),
        rmedian_ae=_relative(baseline.median_ae, method.median_ae),
        rwis=_relative(baseline.mwis, method.mwis),
        rc=rc,
    )


@dataclass
class StratificationRow:
    bucket_lo: float
    bucket_hi: float
    method_median: float
    method_q25: float
    method_q75: float
    baseline_median: float
    baseline_q25: float
    baseline_q75: float
    n: int


def growth_rates_from_weekly(weekly_totals) -> np.ndarray:
    """Relative slope of a smoothing-spline trend through weekly totals.

    Fits a cubic smoothing spline (penalty chosen by generalized cross
    validation) and returns spline'(w) / spline(w) per week. Weeks where the
    spline is non-positive come back as NaN and should be excluded.
    """
    y = np.asarray(weekly_totals, dtype=float)
    if y.size < 8:
        raise ValueError(f"need at least 8 weekly points for the spline, got {y.size}")
    x = np.arange(y.size, dtype=float)
    spline = make_smoothing_spline(x, y)
    value = spline(x)
    slope = spline.derivative()(x)
    with np.errstate(divide="ignore", invalid="ignore"):
        rate = np.where(value > 0.0, slope / value, np.nan)
    return rate


def growth_rate_stratification(
    samples: Iterable[tuple[float, float, float]],
    bucket_width: float = 0.01,
) -> list[StratificationRow]:
    """Bucket pooled (growth_rate, method_ape, baseline_ape) samples.

    Growth rates land in ``bucket_width``-wide bins; each bin reports the
    median and quartiles of the absolute percentage errors of both
    forecasters. Samples with a NaN growth rate are dropped.
    """
    binned: dict[int, list[tuple[float, float]]] = {}
    for rate, m_ape, b_ape in samples:
        if not math.isfinite(rate):
            continue
        binned.setdefault(math.floor(rate / bucket_width), []).append((m_ape, b_ape))
    rows = []
    for b in sorted(binned):
        m = np.array([p[0] for p in binned[b]])
        base = np.array([p[1] for p in binned[b]])
        rows.append(
            StratificationRow(
                bucket_lo=b * bucket_width,
                bucket_hi=(b + 1) * bucket_width,
                method_median=float(np.median(m)),
                method_q25=float(np.quantile(m, 0.25)),
                method_q75=float(np.quantile(m, 0.75)),
                baseline_median=float(np.median(base)),
                baseline_q25=float(np.quantile(base, 0.25)),
                baseline_q75=float(np.quantile(base, 0.75)),
                n=len(binned[b]),
            )
        )
    return rows
