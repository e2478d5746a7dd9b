"""Cleaning of raw daily count series before trend estimation.

Three stages, applied in order:

1. negative reports (retrospective reassessments) are replaced by a
   week-over-week growth estimate and the history is rescaled so cumulative
   counts are preserved;
2. implausible interior zero runs (weekend gaps reported in bulk on the next
   reporting day) are redistributed uniformly over the gap;
3. implausible trailing zeros are marked as missing reports and excluded
   from the trusted range.

Plausibility of a zero is judged against a Poisson rate estimated from the
preceding week: the zero survives if exp(-rate) is at least the configured
threshold.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from datetime import date
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from .ingest import DailySeries, RegionKey

__all__ = [
    "Provenance",
    "CleanSeries",
    "fix_negatives",
    "impute_zero_runs",
    "detect_trailing_missing",
    "preprocess_pipeline",
]

#: history needed for the full negative-substitution formula: the weekly sum
#: one week back and the one two weeks back
_FULL_HISTORY_DAYS = 14


class Provenance(str, Enum):
    OBSERVED = "observed"
    IMPUTED = "imputed"
    RESCALED = "rescaled"
    REPLACED = "replaced"


@dataclass
class CleanSeries:
    """A dense, non-negative daily series with a trusted-range marker."""

    region: RegionKey
    start_date: date
    values: np.ndarray
    forecast_anchor: int
    provenance: list[Provenance]
    kind: str = "cases"
    flags: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 1 or self.values.size == 0:
            raise ValueError("values must be a non-empty 1-D array")
        if not (0 <= self.forecast_anchor < self.values.size):
            raise ValueError("forecast_anchor out of range")
        if len(self.provenance) != self.values.size:
            raise ValueError("provenance must match values")

    @property
    def trusted(self) -> np.ndarray:
        return self.values[: self.forecast_anchor + 1]


def _dense_values(series: DailySeries) -> np.ndarray:
    """Materialise a raw series as floats; missing reports count as zero.

    The upstream sources do not distinguish a missing report from a true
    zero, so both enter the cleaning stages as zeros.
    """
    return np.array([0.0 if v is None else float(v) for v in series.values])


def _weekly_sum(values: np.ndarray, s: int) -> float:
    """Sum of the 7 days ending at index ``s`` (requires s >= 6)."""
    return float(values[s - 6 : s + 1].sum())


def fix_negatives(series: DailySeries) -> CleanSeries:
    """Replace negative daily reports, preserving cumulative counts.

    A negative at day t is substituted by the value one week earlier times
    the growth of weekly totals, x[t-7] * W(t-1) / W(t-8), where W(s) is the
    7-day sum ending at s over the already-corrected history. All values up
    to and including t are then scaled by one factor so the cumulative total
    at t matches the raw cumulative total (which the negative had reduced).

    Negatives with fewer than 14 days of history are replaced by zero before
    rescaling, and a zero W(t-8) pins the growth factor at one; both cases
    are recorded in ``flags``.
    """
    raw = _dense_values(series)
    values = raw.copy()
    n = values.size
    prov = [Provenance.OBSERVED] * n
    flags: list[str] = []

    raw_cumsum = np.cumsum(raw)
    for t in range(n):
        if values[t] >= 0.0:
            continue
        if t < _FULL_HISTORY_DAYS:
            estimate = 0.0
            flags.append(f"negative at day {t} within first {_FULL_HISTORY_DAYS} days")
        else:
            w_prev = _weekly_sum(values, t - 1)
            w_prev2 = _weekly_sum(values, t - 8)
            if w_prev2 == 0.0:
                growth = 1.0
                flags.append(f"zero reference week before day {t}; growth factor forced to 1")
            else:
                growth = w_prev / w_prev2
            estimate = values[t - 7] * growth
        values[t] = estimate
        prov[t] = Provenance.REPLACED

        target = raw_cumsum[t]
        current = values[: t + 1].sum()
        if target <= 0.0 or current <= 0.0:
            values[: t + 1] = 0.0
            factor = 0.0
        else:
            factor = target / current
            values[: t + 1] *= factor
        if factor != 1.0:
            for s in range(t):
                if prov[s] == Provenance.OBSERVED:
                    prov[s] = Provenance.RESCALED

    return CleanSeries(
        region=series.region,
        start_date=series.start_date,
        values=values,
        forecast_anchor=n - 1,
        provenance=prov,
        kind=series.kind,
        flags=flags,
    )


def _zero_is_implausible(rate: float, p_zero_threshold: float) -> bool:
    return math.exp(-rate) < p_zero_threshold


def _rate_before(values: np.ndarray, idx: int) -> float:
    """Mean of the up-to-7 values preceding ``idx`` (0 when none exist)."""
    lo = max(0, idx - 7)
    window = values[lo:idx]
    return float(window.mean()) if window.size else 0.0


def impute_zero_runs(
    series: CleanSeries,
    p_zero_threshold: float = 0.01,
    min_run_for_imputation: int = 1,
) -> CleanSeries:
    """Spread bulk reports uniformly over preceding implausible zero runs.

    A maximal interior run of m >= ``min_run_for_imputation`` zeros followed
    by a report v is replaced, together with v, by m+1 copies of v/(m+1),
    provided a zero is implausible under the Poisson rate of the week before
    the run. Runs touching the start of the series are skipped (no rate
    estimate), and the total count never changes.
    """
    values = series.values.copy()
    prov = list(series.provenance)
    n = values.size
    i = 1
    while i < n:
        if values[i] != 0.0:
            i += 1
            continue
        j = i
        while j < n and values[j] == 0.0:
            j += 1
        if j >= n:
            break  # trailing run, handled by detect_trailing_missing
        run_len = j - i
        if run_len >= min_run_for_imputation:
            rate = _rate_before(values, i)
            if _zero_is_implausible(rate, p_zero_threshold):
                share = values[j] / (run_len + 1)
                values[i : j + 1] = share
                for s in range(i, j + 1):
                    prov[s] = Provenance.IMPUTED
        i = j + 1

    return CleanSeries(
        region=series.region,
        start_date=series.start_date,
        values=values,
        forecast_anchor=series.forecast_anchor,
        provenance=prov,
        kind=series.kind,
        flags=list(series.flags),
    )


def detect_trailing_missing(
    series: CleanSeries, p_zero_threshold: float = 0.01
) -> CleanSeries:
    """Pull the forecast anchor back across implausible trailing zeros.

    Each trailing zero is tested against the Poisson rate of the seven days
    preceding it; an implausible zero is treated as a missing report and
    drops out of the trusted range. Values are kept as stored.
    """
    values = series.values
    anchor = values.size - 1
    while anchor >= 0 and values[anchor] == 0.0:
        rate = _rate_before(values, anchor)
        if not _zero_is_implausible(rate, p_zero_threshold):
            break
        anchor -= 1
    if anchor < 0:
        anchor = 0 if values.size else series.forecast_anchor
    return CleanSeries(
        region=series.region,
        start_date=series.start_date,
        values=values.copy(),
        forecast_anchor=anchor,
        provenance=list(series.provenance),
        kind=series.kind,
        flags=list(series.flags),
    )


def preprocess_pipeline(
    series: DailySeries,
    p_zero_threshold: float = 0.01,
    min_run_for_imputation: int = 1,
) -> CleanSeries:
    """Run the full cleaning chain on a raw daily series."""
    cleaned = fix_negatives(series)
    cleaned = impute_zero_runs(cleaned, p_zero_threshold, min_run_for_imputation)
    return detect_trailing_missing(cleaned, p_zero_threshold)
