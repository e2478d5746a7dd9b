"""Piecewise trend estimation on half-overlapping windows.

Windows of ``L`` days are laid out backward from the series end at stride
L/2. Each window is decomposed with the robust seasonal-trend smoother, the
newest window is rescaled so its final L/2 days carry the observed count
mass, and older windows are joined with a sigmoid blend. Count mass that the
smoother strips from a window (backlogs, spikes) is pushed into earlier
observations before the next window runs, so the assembled trend conserves
the total count. Days the smoother marks as outliers are corrected and the
whole pass reruns once.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ._validation import as_series
from .smoothing import StlParams, stl_decompose

__all__ = ["TrendEstimate", "blend_overlap", "estimate_piecewise_trend"]

BLEND_B = 5.46
BLEND_A_NUMERATOR = 21.1


@dataclass
class TrendEstimate:
    """Smoothed daily trend plus per-day outlier flags.

    ``values`` aligns with the input series; when ``covered_start`` is
    positive (tail-only estimation) entries before it are NaN and excluded
    from the count-conservation guarantee.
    """

    values: np.ndarray
    outlier_mask: np.ndarray
    window_length: int
    covered_start: int = 0
    degenerate: bool = False

    def tail(self, k: int) -> np.ndarray:
        return self.values[-k:]


def blend_overlap(older, newer, L: int) -> np.ndarray:
    """Sigmoid-weighted interpolation of two trend segments on their overlap.

    Both segments run oldest day first and cover the same L/2 days. The
    weight on ``older`` is sigma(tau) = 1 / (1 + exp(a*(tau-1) - b)) with
    a = 21.1/L and b = 5.46, so the older window dominates at the old end of
    the overlap and the previously fixed newer estimate at the recent end.
    """
    older = as_series(older, "older")
    newer = as_series(newer, "newer")
    half = L // 2
    if older.size != half or newer.size != half:
        raise ValueError(f"overlap segments must have length L/2 = {half}")
    tau = np.arange(1, half + 1, dtype=float)
    a = BLEND_A_NUMERATOR / L
    sigma = 1.0 / (1.0 + np.exp(a * (tau - 1.0) - BLEND_B))
    return sigma * older + (1.0 - sigma) * newer


def blend_weights(L: int) -> np.ndarray:
    """The sigma(tau) weights used by :func:`blend_overlap`, tau = 1..L/2."""
    tau = np.arange(1, L // 2 + 1, dtype=float)
    return 1.0 / (1.0 + np.exp((BLEND_A_NUMERATOR / L) * (tau - 1.0) - BLEND_B))


def estimate_piecewise_trend(
    series,
    L: int = 42,
    *,
    stl_params: Optional[StlParams] = None,
    outlier_weight_threshold: float = 0.1,
    max_windows: Optional[int] = None,
) -> TrendEstimate:
    """Estimate the daily trend of a cleaned count series.

    Parameters
    ----------
    series : array-like or CleanSeries
        Non-negative daily counts. A ``CleanSeries`` is truncated at its
        forecast anchor.
    L : int
        Window length in days; must be even. The overlap/stride is L/2.
    stl_params : StlParams, optional
        Decomposition hyperparameters (period 7 by default).
    outlier_weight_threshold : float
        Days whose robustness weight falls below this after the first pass
        are treated as reporting artefacts, corrected toward the trend, and
        the estimation reruns once on the corrected data.
    max_windows : int, optional
        Process only the newest ``max_windows`` windows. The returned trend
        is NaN before ``covered_start``; sums are conserved over the covered
        suffix against the corrected working series rather than globally.
        Intended for rolling backtests where only the trend tail is read.
    """
    values = getattr(series, "values", series)
    anchor = getattr(series, "forecast_anchor", None)
    x = as_series(values, "series", allow_empty=False)
    if anchor is not None:
        x = x[: anchor + 1]
    if L % 2 != 0 or L < 4:
        raise ValueError("L must be an even integer >= 4")
    if np.any(x < 0):
        raise ValueError("piecewise trend expects non-negative (cleaned) counts")
    params = stl_params if stl_params is not None else StlParams()

    n = x.size
    total = float(x.sum())
    if total == 0.0:
        return TrendEstimate(np.zeros(n), np.zeros(n, dtype=bool), L)
    if n < L:
        return _degenerate_short(x, L, params)

    trend, weights, start = _assemble(x, x, L, params, max_windows)
    mask = weights < outlier_weight_threshold
    if mask.any():
        corrected = _correct_outliers(x, trend, mask, start)
        trend, weights, start = _assemble(corrected, corrected, L, params, max_windows)
    else:
        corrected = x

    if start == 0:
        # conservation target is the original cleaned input, absorbing any
        # mass the outlier-correction floor could not relocate
        trend = _rescale_total(trend, total)
    out = np.full(n, np.nan) if start > 0 else trend
    if start > 0:
        out[start:] = trend[start:]
    return TrendEstimate(out, mask, L, covered_start=start)


def _degenerate_short(x: np.ndarray, L: int, params: StlParams) -> TrendEstimate:
    n = x.size
    if n >= 2 * params.period:
        dec = stl_decompose(x, params.period, params)
        trend = np.maximum(dec.trend, 0.0)
    else:
        trend = np.full(n, x.mean())
    trend = _rescale_total(trend, float(x.sum()))
    return TrendEstimate(trend, np.zeros(n, dtype=bool), L, degenerate=True)


def _rescale_total(trend: np.ndarray, target: float) -> np.ndarray:
    s = trend.sum()
    if s > 0.0:
        return trend * (target / s)
    if target > 0.0:
        return np.full_like(trend, target / trend.size)
    return trend


def _window_starts(n: int, L: int, max_windows: Optional[int]) -> list[int]:
    half = L // 2
    starts = []
    a = n - L
    while a > 0:
        starts.append(a)
        a -= half
    starts.append(0)
    if max_windows is not None:
        starts = starts[:max_windows]
    return starts


def _assemble(
    pass_raw: np.ndarray,
    work_init: np.ndarray,
    L: int,
    params: StlParams,
    max_windows: Optional[int],
) -> tuple[np.ndarray, np.ndarray, int]:
    """One backward pass over all windows.

    Returns the assembled trend, per-day robustness weights (minimum over
    the windows covering each day), and the first covered index.
    """
    n = pass_raw.size
    half = L // 2
    work = work_init.astype(float).copy()
    trend = np.zeros(n)
    # a day in two windows keeps its better weight: a genuine spike is
    # outlying in every window containing it, a seam artefact in only one
    weights = np.zeros(n)
    fixed_from = n

    starts = _window_starts(n, L, max_windows)
    for a in starts:
        dec = stl_decompose(work[a : a + L], params.period, params)
        seg = np.maximum(dec.trend, 0.0)
        weights[a : a + L] = np.maximum(weights[a : a + L], dec.robustness_weights)

        if fixed_from == n:
            # newest window: pin the final L/2 days to the observed mass
            target = pass_raw[n - half :].sum()
            got = seg[-half:].sum()
            if got > 0.0:
                seg = seg * (target / got)
            trend[a:] = seg
        else:
            blend_hi = min(fixed_from + half, a + L)
            older = seg[fixed_from - a : blend_hi - a]
            newer = trend[fixed_from:blend_hi]
            trend[a:fixed_from] = seg[: fixed_from - a]
            trend[fixed_from:blend_hi] = blend_overlap(older, newer, L)

            kappa = pass_raw[a:].sum()
            S = trend[a:].sum()
            excess = kappa - S
            if a > 0:
                if excess > 0.0:
                    before = work[:a].sum()
                    if before > 0.0:
                        work[:a] *= (before + excess) / before
                elif excess < 0.0:
                    seg_sum = trend[a:blend_hi].sum()
                    needed = kappa - trend[blend_hi:].sum()
                    if needed >= 0.0 and seg_sum > 0.0:
                        trend[a:blend_hi] *= needed / seg_sum
                    elif S > 0.0:
                        trend[a:] *= max(kappa, 0.0) / S
        fixed_from = a

    weights[:fixed_from] = 1.0  # uncovered days are never outlier candidates
    if fixed_from == 0:
        trend = _rescale_total(trend, float(pass_raw.sum()))
    return trend, weights, fixed_from


def _correct_outliers(
    x: np.ndarray, trend: np.ndarray, mask: np.ndarray, covered_start: int
) -> np.ndarray:
    """Replace flagged days by their trend value, moving the excess backward.

    Earlier days are rescaled proportionally; the factor is floored at zero
    so no day turns negative (any unplaceable mass is recovered by the final
    total rescale). Flags are processed newest first.
    """
    corrected = x.copy()
    flagged = np.flatnonzero(mask)
    flagged = flagged[flagged >= covered_start]
    for t in flagged[::-1]:
        estimate = trend[t]
        excess = corrected[t] - estimate
        corrected[t] = estimate
        if t == 0 or excess == 0.0:
            continue
        before = corrected[:t].sum()
        if before <= 0.0:
            continue
        factor = max((before + excess) / before, 0.0)
        corrected[:t] *= factor
    return corrected
