"""Rolling-origin forecasting engine and backtest driver.

For every origin day the engine sees only data visible at that day (the
series truncated at the origin, or a dated vintage snapshot when one is
supplied), cleans it, estimates the trend tail, extrapolates, and derives
predictive quantiles from the retrospective errors of its own cached past
forecasts. Scoring happens against a separate frozen ground-truth snapshot.
"""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from datetime import date
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .config import PipelineConfig
from .errors import InsufficientHistoryError, UsageError
from .evaluation import (
    RelativeScores,
    ScoreSet,
    StratificationRow,
    absolute_error,
    aggregate_scores,
    growth_rate_stratification,
    growth_rates_from_weekly,
    relative_scores,
    total_coverage,
    wis,
)
from .forecast import baseline_forecast, extrapolate
from .ingest import DailySeries
from .preprocess import preprocess_pipeline
from .probabilistic import (
    QuantileForecast,
    baseline_quantiles_from_errors,
    collect_scaled_errors,
    quantiles_from_history,
)
from .trend import estimate_piecewise_trend

logger = logging.getLogger(__name__)

__all__ = [
    "BacktestConfig",
    "BacktestResult",
    "OriginRecord",
    "RegionEngine",
    "run_backtest",
    "write_backtest_outputs",
]


@dataclass
class BacktestConfig:
    start_date: date
    end_date: date
    weeks: tuple[int, ...] = (1,)
    vintage_mode: str = "as_of"  # "as_of" or "final"
    ground_truth: Optional[dict] = None  # region label -> DailySeries
    force_baseline_method: bool = False
    jobs: int = 1

    def __post_init__(self):
        if self.start_date >= self.end_date:
            raise ValueError("start_date must precede end_date")
        if not self.weeks:
            raise ValueError("at least one weekly horizon is required")
        if any(k not in (1, 2) for k in self.weeks):
            raise ValueError("weekly horizons must be within {1, 2}")
        if self.vintage_mode not in ("as_of", "final"):
            raise ValueError("vintage_mode must be 'as_of' or 'final'")


@dataclass
class OriginRecord:
    origin: int
    week: int
    method_point: float
    baseline_point: float
    truth: float
    method_quantiles: np.ndarray
    baseline_quantiles: np.ndarray

    def scores(self, normalized_wis: bool = False) -> tuple[dict, dict]:
        m = {
            "ae": absolute_error(self.method_point, self.truth),
            "wis": wis(self.method_quantiles, self.truth, normalized_wis),
            "coverage": total_coverage(self.method_quantiles, self.truth),
        }
        b = {
            "ae": absolute_error(self.baseline_point, self.truth),
            "wis": wis(self.baseline_quantiles, self.truth, normalized_wis),
            "coverage": total_coverage(self.baseline_quantiles, self.truth),
        }
        return m, b


def _dense(values) -> np.ndarray:
    return np.array([0.0 if v is None else float(v) for v in values])


class RegionEngine:
    """Caches per-origin forecasts for one region's raw series."""

    def __init__(
        self,
        series: DailySeries,
        config: Optional[PipelineConfig] = None,
        force_baseline_method: bool = False,
    ):
        self.series = series
        self.config = config or PipelineConfig()
        self.force_baseline = force_baseline_method
        self.raw_values = list(series.values)
        self.dense = _dense(series.values)
        self._points: dict[int, Optional[dict]] = {}

    # -- point forecasts ---------------------------------------------------

    def point_at(self, t: int) -> Optional[dict]:
        """Method and baseline point forecasts from data visible at day t.

        Returns None when history is too short. The method forecast is
        calendar-aligned: when trailing missing reports pull the trusted
        anchor before t, extrapolation starts at the anchor and is read off
        at calendar offsets.
        """
        if t in self._points:
            return self._points[t]
        cfg = self.config
        out: Optional[dict] = None
        if t >= 9:
            visible = self.raw_values[: t + 1]
            try:
                base = baseline_forecast(self.dense[: t + 1], t, H=cfg.horizon_days)
                clean = preprocess_pipeline(
                    DailySeries(self.series.region, self.series.start_date, visible, self.series.kind),
                    p_zero_threshold=cfg.p_zero_threshold,
                    min_run_for_imputation=cfg.min_run_for_imputation,
                )
                anchor = clean.forecast_anchor
                gap = t - anchor
                trend = estimate_piecewise_trend(
                    clean,
                    L=cfg.window_days,
                    stl_params=cfg.stl_params(),
                    outlier_weight_threshold=cfg.outlier_weight_threshold,
                    max_windows=cfg.max_windows,
                )
                fc = extrapolate(
                    trend, H=cfg.horizon_days + gap, slope_window=cfg.slope_window
                )
                daily = fc.values[gap : gap + cfg.horizon_days]
                if self.force_baseline:
                    daily = base.values.copy()
                    fc = base
                weekly = {
                    k: float(daily[7 * (k - 1) : 7 * k].sum())
                    for k in (1, 2)
                    if 7 * k <= cfg.horizon_days
                }
                base_weekly = {k: float(base.values[:7].sum()) for k in weekly}
                out = {
                    "daily": daily,
                    "weekly": weekly,
                    "baseline_daily": base.values,
                    "baseline_weekly": base_weekly,
                    "anchor": anchor,
                    "scale_mode": fc.scale_mode,
                    "clean": clean,
                    "trend": trend,
                }
            except InsufficientHistoryError:
                out = None
        self._points[t] = out
        return out

    def ensure_points(self, lo: int, hi: int) -> None:
        for t in range(max(lo, 0), hi + 1):
            self.point_at(t)

    # -- probabilistic forecasts --------------------------------------------

    def weekly_quantiles_at(self, t: int, k: int) -> tuple[QuantileForecast, QuantileForecast]:
        """Method and baseline quantile forecasts of week k past origin t."""
        cfg = self.config
        point = self.point_at(t)
        if point is None or k not in point["weekly"]:
            raise InsufficientHistoryError(f"no point forecast at origin {t}")
        window = cfg.error_window_offset + cfg.horizon_days
        first_needed = t - 7 * k - window + 1
        self.ensure_points(first_needed, t - 7 * k)
        retro = {
            t2: rec["weekly"][k]
            for t2, rec in self._points.items()
            if rec is not None and t2 < t and k in rec["weekly"]
        }
        visible = self.dense[: t + 1]
        history = collect_scaled_errors(
            retro,
            visible,
            h=k,
            horizon_days=cfg.horizon_days,
            min_history=cfg.min_history,
            window_offset=cfg.error_window_offset,
            weekly=True,
            week_index=k,
        )
        method_q = quantiles_from_history(
            point["weekly"][k],
            history,
            target_type="weekly_total",
            target_step=k,
            region=self.series.region,
            kind=self.series.kind,
            min_history=cfg.min_history,
        )

        base_retro = {
            t2: rec["baseline_weekly"][k]
            for t2, rec in self._points.items()
            if rec is not None and t2 < t and k in rec["baseline_weekly"]
        }
        base_errors = []
        eligible = [t2 for t2 in sorted(base_retro) if t2 + 7 * k <= t]
        for t2 in eligible[-window:]:
            lo = t2 + 1 + 7 * (k - 1)
            truth = float(visible[lo : lo + 7].sum())
            base_errors.append(truth - base_retro[t2])
        baseline_q = baseline_quantiles_from_errors(
            point["baseline_weekly"][k],
            base_errors,
            target_step=k,
            region=self.series.region,
            kind=self.series.kind,
            min_history=cfg.min_history,
        )
        if self.force_baseline:
            method_q = baseline_q
        return method_q, baseline_q

    def daily_quantiles_at(self, t: int, h: int) -> QuantileForecast:
        """Quantile forecast of the 7-day rolling mean at horizon h."""
        cfg = self.config
        point = self.point_at(t)
        if point is None:
            raise InsufficientHistoryError(f"no point forecast at origin {t}")
        window = cfg.error_window_offset + cfg.horizon_days
        self.ensure_points(t - h - 3 - window + 1, t - h - 3)
        retro = {
            t2: float(rec["daily"][h - 1])
            for t2, rec in self._points.items()
            if rec is not None and t2 < t
        }
        history = collect_scaled_errors(
            retro,
            self.dense[: t + 1],
            h=h,
            horizon_days=cfg.horizon_days,
            min_history=cfg.min_history,
            window_offset=cfg.error_window_offset,
        )
        return quantiles_from_history(
            float(point["daily"][h - 1]),
            history,
            target_type="daily_mean",
            target_step=h,
            region=self.series.region,
            kind=self.series.kind,
            min_history=cfg.min_history,
        )


@dataclass
class RegionBacktest:
    region: str
    records: dict[int, list[OriginRecord]]  # week -> records
    skipped: int

    def score_table(self, week: int, normalized_wis: bool = False):
        recs = self.records.get(week, [])
        if not recs:
            return None
        m_scores, b_scores = [], []
        for r in recs:
            m, b = r.scores(normalized_wis)
            m_scores.append(m)
            b_scores.append(b)
        method = aggregate_scores(m_scores)
        baseline = aggregate_scores(b_scores)
        return method, baseline, relative_scores(method, baseline)


@dataclass
class BacktestResult:
    regions: list[RegionBacktest]
    stratification: list[StratificationRow]
    skipped_total: int


def _origin_range(series: DailySeries, bt: BacktestConfig) -> range:
    first = (bt.start_date - series.start_date).days
    last = (bt.end_date - series.start_date).days
    return range(max(first, 0), last + 1)


def _backtest_one_region(args) -> tuple[RegionBacktest, list[tuple[float, float, float]]]:
    series, truth, pipeline_cfg, bt = args
    # in "final" mode forecasts are built from the frozen scoring snapshot
    # itself (truncated at each origin) instead of the live input series
    input_series = truth if bt.vintage_mode == "final" else series
    engine = RegionEngine(input_series, pipeline_cfg, bt.force_baseline_method)
    truth_dense = _dense(truth.values)
    offset = (input_series.start_date - truth.start_date).days

    records: dict[int, list[OriginRecord]] = {k: [] for k in bt.weeks}
    skipped = 0
    for t in _origin_range(input_series, bt):
        if t >= len(input_series.values):
            break
        for k in bt.weeks:
            truth_hi = offset + t + 7 * k
            truth_lo = offset + t + 1 + 7 * (k - 1)
            if truth_lo < 0 or truth_hi >= truth_dense.size:
                skipped += 1
                continue
            try:
                method_q, baseline_q = engine.weekly_quantiles_at(t, k)
            except InsufficientHistoryError:
                skipped += 1
                continue
            records[k].append(
                OriginRecord(
                    origin=t,
                    week=k,
                    method_point=method_q.point,
                    baseline_point=baseline_q.point,
                    truth=float(truth_dense[truth_lo : truth_hi + 1].sum()),
                    method_quantiles=method_q.quantiles,
                    baseline_quantiles=baseline_q.quantiles,
                )
            )

    samples = _stratification_samples(truth_dense, offset, records)
    return RegionBacktest(series.region.label, records, skipped), samples


def _stratification_samples(
    truth_dense: np.ndarray, offset: int, records: dict[int, list[OriginRecord]]
) -> list[tuple[float, float, float]]:
    """(growth rate, method APE, baseline APE) for week-1 scored origins."""
    recs = records.get(1, [])
    n_weeks = truth_dense.size // 7
    if not recs or n_weeks < 8:
        return []
    weekly = truth_dense[: n_weeks * 7].reshape(n_weeks, 7).sum(axis=1)
    rates = growth_rates_from_weekly(weekly)
    samples = []
    for r in recs:
        week_idx = min(max((offset + r.origin) // 7, 0), n_weeks - 1)
        rate = rates[week_idx]
        if not np.isfinite(rate) or r.truth <= 0.0:
            continue
        samples.append(
            (
                float(rate),
                absolute_error(r.method_point, r.truth) / r.truth,
                absolute_error(r.baseline_point, r.truth) / r.truth,
            )
        )
    return samples


def run_backtest(
    series_by_region: dict[str, DailySeries],
    bt: BacktestConfig,
    pipeline_cfg: Optional[PipelineConfig] = None,
) -> BacktestResult:
    """Backtest every region and pool the growth-rate stratification.

    ``bt.ground_truth`` supplies the frozen scoring snapshot; without it the
    input series themselves serve as ground truth. Regions run independently
    (optionally in parallel); the merge is ordered by region label so the
    output is deterministic regardless of worker count.
    """
    if not series_by_region:
        raise UsageError("no regions to backtest")
    pipeline_cfg = pipeline_cfg or PipelineConfig()
    truth_map = bt.ground_truth or {}
    worker_bt = replace(bt, ground_truth=None)  # keep worker payloads small

    tasks = []
    for label in sorted(series_by_region):
        series = series_by_region[label]
        truth = truth_map.get(label, series)
        tasks.append((series, truth, pipeline_cfg, worker_bt))

    if bt.jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=bt.jobs) as pool:
            results = list(pool.map(_backtest_one_region, tasks))
    else:
        results = [_backtest_one_region(task) for task in tasks]

    regions = [r for r, _ in results]
    samples = [s for _, region_samples in results for s in region_samples]
    skipped = sum(r.skipped for r in regions)
    if skipped:
        logger.info("skipped %d origin/week combinations with insufficient history", skipped)
    return BacktestResult(
        regions=regions,
        stratification=growth_rate_stratification(samples),
        skipped_total=skipped,
    )


def write_backtest_outputs(result: BacktestResult, out_dir, weeks: Sequence[int], normalized_wis: bool = False) -> list[Path]:
    """Write per-horizon score CSVs and the stratification table."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    metrics = ("mae", "median_ae", "mwis", "mean_total_coverage")
    for k in weeks:
        path = out_dir / f"scores_{k}wk.csv"
        lines = ["region,metric,method,baseline,relative"]
        for region in result.regions:
            table = region.score_table(k, normalized_wis)
            if table is None:
                continue
            method, baseline, rel = table
            rel_values = {
                "mae": rel.rmae,
                "median_ae": rel.rmedian_ae,
                "mwis": rel.rwis,
                "mean_total_coverage": rel.rc,
            }
            for metric in metrics:
                m = getattr(method, metric)
                b = getattr(baseline, metric)
                r = rel_values[metric]
                rel_str = "" if r is None else _fmt(r)
                lines.append(f"{region.region},{metric},{_fmt(m)},{_fmt(b)},{rel_str}")
        path.write_bytes(("\n".join(lines) + "\n").encode("utf-8"))
        written.append(path)

    path = out_dir / "stratification.csv"
    lines = [
        "bucket_lo,bucket_hi,method_median,method_q25,method_q75,"
        "baseline_median,baseline_q25,baseline_q75"
    ]
    for row in result.stratification:
        lines.append(
            ",".join(
                _fmt(v)
                for v in (
                    row.bucket_lo,
                    row.bucket_hi,
                    row.method_median,
                    row.method_q25,
                    row.method_q75,
                    row.baseline_median,
                    row.baseline_q25,
                    row.baseline_q75,
                )
            )
        )
    path.write_bytes(("\n".join(lines) + "\n").encode("utf-8"))
    written.append(path)
    return written


def _fmt(v: float) -> str:
    return f"{v:.6g}"
