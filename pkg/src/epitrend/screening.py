"""Data-reliability screening: outlier counting and region selection.

The selection rule works on raw, unprocessed series so it stays independent
of the trend estimation: regions reporting on fewer than 70% of days are
dropped, then regions with a missing run longer than five days, and finally
the fixed number of regions with the most outliers among the survivors.
Since the sources conflate missing reports with zeros, a day counts as
unreported when its value is absent or zero.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .ingest import DailySeries, RegionKey

__all__ = ["ScreeningReport", "mad_outliers", "screen_series", "select_regions"]

MAD_SCALE = 1.4826  # relates the MAD to the standard deviation under normality


@dataclass
class ScreeningReport:
    region: RegionKey
    reporting_fraction: float
    max_missing_run: int
    outlier_count: int
    selected: bool = False
    exclusion_reason: Optional[str] = None  # low_reporting | long_gap | many_outliers

    def __post_init__(self):
        if self.selected and self.exclusion_reason is not None:
            raise ValueError("a selected region cannot carry an exclusion reason")


def mad_outliers(series, window: int = 22, n_sigmas: float = 2.0) -> np.ndarray:
    """Flag values deviating from a sliding-window median by > n_sigmas.

    The dispersion estimate is the window MAD scaled by 1.4826. The window
    holds the 22 observations nearest each index (11 before, 10 after),
    shifted inward at the edges so it always spans 22 points. A zero MAD
    degenerates the rule to flagging any value different from the median.
    """
    x = np.asarray(series, dtype=float)
    n = x.size
    if n < window:
        raise ValueError(f"need at least {window} observations, got {n}")
    before = window // 2
    mask = np.zeros(n, dtype=bool)
    for i in range(n):
        lo = min(max(0, i - before), n - window)
        w = x[lo : lo + window]
        med = np.median(w)
        mad = np.median(np.abs(w - med))
        dev = abs(x[i] - med)
        if mad == 0.0:
            mask[i] = dev > 0.0
        else:
            mask[i] = dev > n_sigmas * MAD_SCALE * mad
    return mask


def _dense(series: DailySeries) -> np.ndarray:
    return np.array([0.0 if v is None else float(v) for v in series.values])


def screen_series(series: DailySeries, mad_window: int = 22) -> ScreeningReport:
    """Reporting statistics and outlier count for one raw series."""
    dense = _dense(series)
    n = dense.size
    reported = dense != 0.0
    fraction = float(reported.sum()) / n
    max_run = run = 0
    for flag in reported:
        run = 0 if flag else run + 1
        max_run = max(max_run, run)
    outliers = int(mad_outliers(dense, mad_window).sum()) if n >= mad_window else 0
    return ScreeningReport(
        region=series.region,
        reporting_fraction=fraction,
        max_missing_run=max_run,
        outlier_count=outliers,
    )


def select_regions(
    reports: Sequence[ScreeningReport],
    min_reporting_fraction: float = 0.70,
    max_gap_days: int = 5,
    n_exclude_outliers: int = 20,
) -> list[ScreeningReport]:
    """Apply the three exclusion rules and mark the survivors selected.

    The outlier cut removes the ``n_exclude_outliers`` regions with the most
    outliers among those passing the first two rules; regions tied with the
    boundary count are all removed, keeping the rule deterministic.
    """
    out: list[ScreeningReport] = []
    survivors: list[ScreeningReport] = []
    for r in reports:
        if r.reporting_fraction < min_reporting_fraction:
            out.append(_mark(r, "low_reporting"))
        elif r.max_missing_run > max_gap_days:
            out.append(_mark(r, "long_gap"))
        else:
            survivors.append(r)

    if n_exclude_outliers > 0 and survivors:
        counts = sorted((r.outlier_count for r in survivors), reverse=True)
        if len(counts) <= n_exclude_outliers:
            cut = counts[-1]
        else:
            cut = counts[n_exclude_outliers - 1]
        for r in survivors:
            if r.outlier_count >= cut:
                out.append(_mark(r, "many_outliers"))
            else:
                out.append(_mark(r, None))
    else:
        out.extend(_mark(r, None) for r in survivors)
    return sorted(out, key=lambda r: r.region.label)


def _mark(report: ScreeningReport, reason: Optional[str]) -> ScreeningReport:
    return ScreeningReport(
        region=report.region,
        reporting_fraction=report.reporting_fraction,
        max_missing_run=report.max_missing_run,
        outlier_count=report.outlier_count,
        selected=reason is None,
        exclusion_reason=reason,
    )
