"""LOESS local regression and robust seasonal-trend decomposition.

The decomposition follows the classic two-loop scheme: an inner loop that
alternates cycle-subseries smoothing and trend smoothing, and an outer loop
that downweights outlying observations with bisquare robustness weights.
Both smoothers are windowed local polynomial regressions with tricube
distance weights.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ._validation import as_series

__all__ = [
    "LoessConfig",
    "StlParams",
    "StlDecomposition",
    "loess_fit",
    "stl_decompose",
]


@dataclass
class LoessConfig:
    """Window width, polynomial degree and optional per-point weights."""

    span: int
    degree: int = 1
    robustness_weights: Optional[np.ndarray] = None

    def validate(self, n: int) -> None:
        if self.degree not in (0, 1, 2):
            raise ValueError(f"degree must be 0, 1 or 2, got {self.degree}")
        if self.span < self.degree + 2:
            raise ValueError(f"span {self.span} too small for degree {self.degree}")
        if self.span > n:
            raise ValueError(f"span {self.span} exceeds series length {n}")
        if self.robustness_weights is not None:
            w = np.asarray(self.robustness_weights, dtype=float)
            if w.shape != (n,):
                raise ValueError("robustness_weights must match the series length")
            if w.min() < 0 or w.max() > 1:
                raise ValueError("robustness_weights must lie in [0, 1]")


@dataclass
class StlParams:
    """Decomposition hyperparameters; ``None`` spans fall back to defaults.

    The default trend span is the smallest odd integer not below
    1.5 * period / (1 - 1.5 / seasonal_span); the default low-pass span the
    smallest odd integer not below the period.
    """

    period: int = 7
    seasonal_span: int = 11
    seasonal_degree: int = 1
    trend_span: Optional[int] = None
    trend_degree: int = 1
    lowpass_span: Optional[int] = None
    lowpass_degree: int = 1
    n_inner: int = 2
    n_outer: int = 5

    def resolved_trend_span(self) -> int:
        if self.trend_span is not None:
            return self.trend_span
        raw = 1.5 * self.period / (1.0 - 1.5 / self.seasonal_span)
        return _next_odd(raw)

    def resolved_lowpass_span(self) -> int:
        if self.lowpass_span is not None:
            return self.lowpass_span
        return _next_odd(self.period)


@dataclass
class StlDecomposition:
    trend: np.ndarray
    seasonal: np.ndarray
    residual: np.ndarray
    robustness_weights: np.ndarray

    def __post_init__(self):
        n = len(self.trend)
        if not (len(self.seasonal) == len(self.residual) == len(self.robustness_weights) == n):
            raise ValueError("decomposition components must share one length")


def _next_odd(x: float) -> int:
    n = int(np.ceil(x))
    return n if n % 2 == 1 else n + 1


def _local_fit(
    y: np.ndarray,
    x_eval: np.ndarray,
    span: int,
    degree: int,
    rho: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Evaluate a tricube-weighted local polynomial fit of ``y`` at ``x_eval``.

    ``y`` sits on the integer grid 0..n-1. Windows are the ``span`` nearest
    observations; they truncate at the edges rather than wrap or reflect.
    When ``span`` is at least n, all points are used and the tricube cutoff
    is stretched by span/n, so weights stay strictly positive.

    A window whose design turns singular (all robustness weights zero, or a
    degenerate second moment) falls back to the weighted mean of the window,
    and to the tricube-only mean if even that is undefined.
    """
    n = y.size
    grid = np.arange(n, dtype=float)
    t = x_eval[:, None] - grid[None, :]  # (m, n), offsets from eval points
    d = np.abs(t)
    if span < n:
        cut = np.partition(d, span - 1, axis=1)[:, span - 1]
    else:
        cut = d.max(axis=1) * (span / n)
    cut = np.maximum(cut, np.finfo(float).tiny)
    u = d / cut[:, None]
    w_tri = np.clip(1.0 - u**3, 0.0, None) ** 3
    w = w_tri if rho is None else w_tri * rho[None, :]

    fitted = _solve_rows(y, t, w, degree)
    bad = ~np.isfinite(fitted)
    if bad.any():
        # re-solve degenerate rows ignoring robustness weights
        fitted[bad] = _solve_rows(y, t[bad], w_tri[bad], 0)
        still = ~np.isfinite(fitted)
        if still.any():
            fitted[still] = float(y.mean())
    return fitted


def _solve_rows(y: np.ndarray, t: np.ndarray, w: np.ndarray, degree: int) -> np.ndarray:
    """Closed-form weighted polynomial fits, one row per evaluation point.

    The design is centred at each evaluation point so the fitted value is
    the constant coefficient. Returns NaN for rows that are singular.
    """
    s0 = w.sum(axis=1)
    sy = w @ y
    with np.errstate(divide="ignore", invalid="ignore"):
        mean_fit = sy / s0
    if degree == 0:
        return mean_fit

    wt = w * t
    s1 = wt.sum(axis=1)
    s2 = (wt * t).sum(axis=1)
    sty = wt @ y
    if degree == 1:
        det = s0 * s2 - s1 * s1
        ok = det > 1e-12 * np.maximum(s0 * s2, np.finfo(float).tiny)
        with np.errstate(divide="ignore", invalid="ignore"):
            beta1 = (s0 * sty - s1 * sy) / det
            fit = (sy - beta1 * s1) / s0
        return np.where(ok, fit, mean_fit)

    # degree 2: batched 3x3 normal equations
    wt2 = wt * t
    s3 = (wt2 * t).sum(axis=1)
    s4 = (wt2 * t * t).sum(axis=1)
    st2y = wt2 @ y
    m = len(s0)
    A = np.empty((m, 3, 3))
    A[:, 0, 0] = s0
    A[:, 0, 1] = A[:, 1, 0] = s1
    A[:, 0, 2] = A[:, 2, 0] = A[:, 1, 1] = s2
    A[:, 1, 2] = A[:, 2, 1] = s3
    A[:, 2, 2] = s4
    b = np.stack([sy, sty, st2y], axis=1)[..., None]
    fit = np.full(m, np.nan)
    solvable = np.linalg.matrix_rank(A) == 3
    if solvable.any():
        try:
            sol = np.linalg.solve(A[solvable], b[solvable])
            fit[solvable] = sol[:, 0, 0]
        except np.linalg.LinAlgError:
            pass
    return np.where(np.isfinite(fit), fit, mean_fit)


def loess_fit(y, config: LoessConfig) -> np.ndarray:
    """Smooth ``y`` by local polynomial regression, fitted at each index."""
    arr = as_series(y, "y")
    config.validate(arr.size)
    rho = None
    if config.robustness_weights is not None:
        rho = np.asarray(config.robustness_weights, dtype=float)
    return _local_fit(arr, np.arange(arr.size, dtype=float), config.span, config.degree, rho)


def _moving_average(x: np.ndarray, width: int) -> np.ndarray:
    return np.convolve(x, np.full(width, 1.0 / width), mode="valid")


def _bisquare_weights(residual: np.ndarray, data_scale: float = 0.0) -> np.ndarray:
    # a residual spread that is pure float noise relative to the data must
    # not demote anything, so the scale is floored at 1e-9 of the data
    scale = 6.0 * np.median(np.abs(residual))
    if scale <= 1e-9 * data_scale or scale <= 0.0:
        return np.ones_like(residual)
    u = np.abs(residual) / scale
    w = (1.0 - u**2) ** 2
    w[u >= 1.0] = 0.0
    return np.clip(w, 0.0, 1.0)


def stl_decompose(y, period: int, params: Optional[StlParams] = None) -> StlDecomposition:
    """Split ``y`` into trend, seasonal and residual components.

    Requires at least two full periods of data. With ``period == 1`` the
    seasonal component is fixed at zero and only the robust trend smoother
    runs.
    """
    arr = as_series(y, "y")
    if params is None:
        params = StlParams(period=period)
    n = arr.size
    if period < 1:
        raise ValueError("period must be at least 1")
    if period == 1:
        return _trend_only(arr, params)
    if n < 2 * period:
        raise ValueError(f"series length {n} is below two periods ({2 * period})")

    trend_span = params.resolved_trend_span()
    lowpass_span = params.resolved_lowpass_span()
    grid = np.arange(n, dtype=float)

    scale_y = float(np.abs(arr).max())
    trend = np.zeros(n)
    seasonal = np.zeros(n)
    rho = np.ones(n)
    for _ in range(params.n_outer):
        for _ in range(params.n_inner):
            detrended = arr - trend
            extended = np.empty(n + 2 * period)
            for phase in range(period):
                sub = detrended[phase::period]
                m = sub.size
                ev = np.arange(-1.0, m + 1.0)
                fitted = _local_fit(
                    sub, ev, params.seasonal_span, params.seasonal_degree, rho[phase::period]
                )
                # day index phase + period*c for cycles c = -1..m, shifted by one period
                extended[phase::period] = fitted
            low = _moving_average(extended, period)
            low = _moving_average(low, period)
            low = _moving_average(low, 3)
            low = _local_fit(low, grid, lowpass_span, params.lowpass_degree)
            seasonal = extended[period : period + n] - low
            trend = _local_fit(arr - seasonal, grid, trend_span, params.trend_degree, rho)
        residual = arr - trend - seasonal
        rho = _bisquare_weights(residual, scale_y)
    residual = arr - trend - seasonal
    return StlDecomposition(trend, seasonal, residual, rho)


def _trend_only(arr: np.ndarray, params: StlParams) -> StlDecomposition:
    n = arr.size
    span = min(params.resolved_trend_span(), n)
    grid = np.arange(n, dtype=float)
    rho = np.ones(n)
    trend = np.zeros(n)
    for _ in range(params.n_outer):
        trend = _local_fit(arr, grid, span, params.trend_degree, rho)
        rho = _bisquare_weights(arr - trend, float(np.abs(arr).max()))
    seasonal = np.zeros(n)
    return StlDecomposition(trend, seasonal, arr - trend, rho)
