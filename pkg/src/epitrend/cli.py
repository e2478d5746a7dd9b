"""Command-line orchestration of the full pipeline.

Subcommands: ingest, preprocess, trend, forecast, backtest, screen,
riskmap, plot. Exit codes: 0 success, 1 data error, 2 usage error. All I/O
happens at the edges of each subcommand; the library core stays pure.
"""

from __future__ import annotations

import argparse
import fnmatch
import logging
import sys
from datetime import date, timedelta
from pathlib import Path

import numpy as np

from .backtest import BacktestConfig, RegionEngine, run_backtest, write_backtest_outputs
from .config import PipelineConfig, load_config
from .errors import EpitrendError, InsufficientHistoryError, UsageError
from .ingest import DailySeries, parse_jhu_wide, parse_long, write_hub_quantiles, write_long
from .preprocess import preprocess_pipeline
from .riskmap import (
    RiskInput,
    classify,
    read_population_csv,
    read_reff_csv,
    read_tests_csv,
    write_riskmap_csv,
)
from .screening import screen_series, select_regions
from .trend import estimate_piecewise_trend

logger = logging.getLogger("epitrend")

_PLOT_BAND_LEVELS = (0.05, 0.10, 0.25)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="epitrend",
        description="Trend estimation, forecasting and evaluation for daily count series",
    )
    parser.add_argument("--config", type=Path, help="flat TOML file with pipeline parameters")
    parser.add_argument("--regions", default="*", help="glob filter on region labels")
    parser.add_argument("--as-of", dest="as_of", type=date.fromisoformat, help="pretend today is this date")
    parser.add_argument("--seed", type=int, default=0, help="seed for synthetic-data helpers (no effect on real data)")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_input(p, fmt_default="long"):
        p.add_argument("input", type=Path, help="input CSV")
        p.add_argument("--format", choices=["jhu", "long"], default=fmt_default)
        p.add_argument("--kind", choices=["cases", "deaths"], default="cases")

    p = sub.add_parser("ingest", help="normalize raw data to the long layout")
    add_input(p, fmt_default="jhu")
    p.add_argument("-o", "--output", type=Path, required=True)

    p = sub.add_parser("preprocess", help="clean series and write the long layout")
    add_input(p)
    p.add_argument("-o", "--output", type=Path, required=True)

    p = sub.add_parser("trend", help="estimate trends and write region,date,trend,outlier")
    add_input(p)
    p.add_argument("-o", "--output", type=Path, required=True)

    p = sub.add_parser("forecast", help="hub quantile CSV plus an SVG per region")
    add_input(p)
    p.add_argument("-o", "--output-dir", type=Path, required=True)
    p.add_argument("--weeks", default="1,2", help="weekly horizons, comma separated")
    p.add_argument("--no-plots", action="store_true")

    p = sub.add_parser("backtest", help="rolling-origin evaluation against the baseline")
    add_input(p)
    p.add_argument("-o", "--output-dir", type=Path, required=True)
    p.add_argument("--start", type=date.fromisoformat, required=True)
    p.add_argument("--end", type=date.fromisoformat, required=True)
    p.add_argument("--truth", type=Path, help="frozen ground-truth snapshot (long CSV)")
    p.add_argument("--weeks", default="1")
    p.add_argument("--vintage-mode", choices=["as_of", "final"], default="as_of")
    p.add_argument("--force-baseline", action="store_true", help="score the baseline against itself")
    p.add_argument("--jobs", type=int, default=1)

    p = sub.add_parser("screen", help="data-reliability screening report")
    add_input(p)
    p.add_argument("-o", "--output", type=Path, required=True)

    p = sub.add_parser("riskmap", help="green/orange/red/grey classification per region")
    add_input(p)
    p.add_argument("-o", "--output", type=Path, required=True)
    p.add_argument("--reff", type=Path, help="region,date,r_eff CSV")
    p.add_argument("--tests", type=Path, help="region,tests_per_million CSV")
    p.add_argument("--population", type=Path, required=True, help="region,population CSV")

    p = sub.add_parser("plot", help="SVG chart per region, no forecast files")
    add_input(p)
    p.add_argument("-o", "--output-dir", type=Path, required=True)
    return parser


def _load_series(args) -> dict[str, DailySeries]:
    data = args.input.read_bytes()
    if args.format == "jhu":
        series_list = parse_jhu_wide(data, kind=args.kind)
    else:
        series_list = parse_long(data, kind=args.kind)
    selected = {
        s.region.label: s for s in series_list if fnmatch.fnmatch(s.region.label, args.regions)
    }
    if not selected:
        raise UsageError(f"no region matches {args.regions!r} in {args.input}")
    return selected


def _pipeline_config(args) -> PipelineConfig:
    return load_config(args.config) if args.config else PipelineConfig()


def _parse_weeks(text: str) -> tuple[int, ...]:
    try:
        weeks = tuple(sorted({int(w) for w in text.split(",") if w.strip()}))
    except ValueError:
        raise UsageError(f"bad --weeks value {text!r}")
    if not weeks or any(k not in (1, 2) for k in weeks):
        raise UsageError("--weeks must be a subset of 1,2")
    return weeks


def _origin_index(series: DailySeries, as_of) -> int:
    if as_of is None:
        return len(series.values) - 1
    t = (as_of - series.start_date).days
    if t < 0:
        raise UsageError(f"--as-of {as_of} predates {series.region.label} data")
    return min(t, len(series.values) - 1)


def _cmd_ingest(args) -> int:
    series = _load_series(args)
    args.output.write_bytes(write_long(series.values()))
    logger.info("wrote %d regions to %s", len(series), args.output)
    return 0


def _cmd_preprocess(args) -> int:
    cfg = _pipeline_config(args)
    cleaned = []
    for label in sorted(series := _load_series(args)):
        clean = preprocess_pipeline(
            series[label],
            p_zero_threshold=cfg.p_zero_threshold,
            min_run_for_imputation=cfg.min_run_for_imputation,
        )
        # untrusted trailing days are emitted as missing reports
        values = [
            float(v) if i <= clean.forecast_anchor else None
            for i, v in enumerate(clean.values)
        ]
        cleaned.append(
            DailySeries(clean.region, clean.start_date, values, clean.kind)
        )
    args.output.write_bytes(write_long(cleaned))
    return 0


def _cmd_trend(args) -> int:
    cfg = _pipeline_config(args)
    lines = ["region,date,trend,outlier"]
    for label in sorted(series := _load_series(args)):
        clean = preprocess_pipeline(
            series[label],
            p_zero_threshold=cfg.p_zero_threshold,
            min_run_for_imputation=cfg.min_run_for_imputation,
        )
        est = estimate_piecewise_trend(
            clean,
            L=cfg.window_days,
            stl_params=cfg.stl_params(),
            outlier_weight_threshold=cfg.outlier_weight_threshold,
        )
        start = clean.start_date
        for i, v in enumerate(est.values):
            day = (start + timedelta(days=i)).isoformat()
            flag = 1 if est.outlier_mask[i] else 0
            lines.append(f"{label},{day},{v:.6f},{flag}")
    args.output.write_bytes(("\n".join(lines) + "\n").encode("utf-8"))
    return 0


def _forecast_payloads(args, cfg: PipelineConfig, weeks):
    """Per-region engine, origin index and weekly quantile forecasts."""
    payloads = {}
    for label, series in sorted(_load_series(args).items()):
        engine = RegionEngine(series, cfg)
        t = _origin_index(series, args.as_of)
        try:
            weekly = {k: engine.weekly_quantiles_at(t, k)[0] for k in weeks}
        except InsufficientHistoryError as exc:
            raise InsufficientHistoryError(f"{label}: {exc}") from exc
        payloads[label] = (engine, t, weekly)
    return payloads


def _write_region_plot(out_dir: Path, label: str, engine: RegionEngine, t: int) -> None:
    from .plotting import plot_region_forecast

    point = engine.point_at(t)
    bands = {}
    for alpha in _PLOT_BAND_LEVELS:
        lows, highs = [], []
        try:
            for h in range(1, engine.config.horizon_days + 1):
                qf = engine.daily_quantiles_at(t, h)
                lo, hi = qf.interval(alpha)
                lows.append(lo)
                highs.append(hi)
            bands[alpha] = (np.array(lows), np.array(highs))
        except InsufficientHistoryError:
            bands = {}
            break
    trend_est = point["trend"]
    clean = point["clean"]
    plot_region_forecast(
        out_dir / f"{label.replace('/', '_')}.svg",
        region_label=label,
        start_date=engine.series.start_date,
        observed=engine.dense[: t + 1],
        trend=trend_est.values,
        covered_start=trend_est.covered_start,
        forecast_values=point["daily"],
        anchor=t,
        daily_quantiles=bands or None,
    )


def _cmd_forecast(args) -> int:
    cfg = _pipeline_config(args)
    weeks = _parse_weeks(args.weeks)
    payloads = _forecast_payloads(args, cfg, weeks)
    args.output_dir.mkdir(parents=True, exist_ok=True)

    forecasts = [qf for _, _, weekly in payloads.values() for qf in weekly.values()]
    some_label = next(iter(payloads))
    origin_date = (
        payloads[some_label][0].series.start_date + timedelta(days=payloads[some_label][1])
    )
    hub_path = args.output_dir / f"forecast_{origin_date.isoformat()}.csv"
    hub_path.write_bytes(write_hub_quantiles(forecasts, origin_date))
    logger.info("wrote %s", hub_path)

    if not args.no_plots:
        for label, (engine, t, _) in payloads.items():
            _write_region_plot(args.output_dir, label, engine, t)
    return 0


def _cmd_backtest(args) -> int:
    cfg = _pipeline_config(args)
    weeks = _parse_weeks(args.weeks)
    series = _load_series(args)
    truth = None
    if args.truth:
        truth_list = parse_long(args.truth.read_bytes(), kind=args.kind)
        truth = {s.region.label: s for s in truth_list}
    bt = BacktestConfig(
        start_date=args.start,
        end_date=args.end,
        weeks=weeks,
        vintage_mode=args.vintage_mode,
        ground_truth=truth,
        force_baseline_method=args.force_baseline,
        jobs=args.jobs,
    )
    result = run_backtest(series, bt, cfg)
    written = write_backtest_outputs(result, args.output_dir, weeks, cfg.wis_normalized)
    for path in written:
        logger.info("wrote %s", path)
    return 0


def _cmd_screen(args) -> int:
    cfg = _pipeline_config(args)
    series = _load_series(args)
    reports = [screen_series(s, cfg.mad_window) for s in series.values()]
    marked = select_regions(
        reports,
        min_reporting_fraction=cfg.min_reporting_fraction,
        max_gap_days=cfg.max_gap_days,
        n_exclude_outliers=cfg.n_exclude_outliers,
    )
    lines = ["region,fraction,max_gap,outliers,selected,reason"]
    for r in marked:
        reason = r.exclusion_reason or ""
        lines.append(
            f"{r.region.label},{r.reporting_fraction:.6g},{r.max_missing_run},"
            f"{r.outlier_count},{int(r.selected)},{reason}"
        )
    args.output.write_bytes(("\n".join(lines) + "\n").encode("utf-8"))
    return 0


def _cmd_riskmap(args) -> int:
    cfg = _pipeline_config(args)
    payloads = _forecast_payloads(args, cfg, weeks=(1,))
    reff = read_reff_csv(args.reff.read_bytes(), args.as_of) if args.reff else {}
    tests = read_tests_csv(args.tests.read_bytes()) if args.tests else {}
    populations = read_population_csv(args.population.read_bytes())

    assessments = {}
    for label, (_, _, weekly) in payloads.items():
        qf = weekly[1]
        region = qf.region
        population = populations.get(label)
        if population is not None:
            from dataclasses import replace

            region = replace(region, population=population)
        assessments[label] = classify(
            RiskInput(
                region=region,
                forecast_weekly_cases=qf.point,
                r_eff=reff.get(label),
                tests_per_million=tests.get(label),
            )
        )
    args.output.write_bytes(write_riskmap_csv(assessments))
    return 0


def _cmd_plot(args) -> int:
    cfg = _pipeline_config(args)
    args.output_dir.mkdir(parents=True, exist_ok=True)
    for label, series in sorted(_load_series(args).items()):
        engine = RegionEngine(series, cfg)
        t = _origin_index(series, args.as_of)
        if engine.point_at(t) is None:
            raise InsufficientHistoryError(f"{label}: not enough history to plot a forecast")
        _write_region_plot(args.output_dir, label, engine, t)
    return 0


_COMMANDS = {
    "ingest": _cmd_ingest,
    "preprocess": _cmd_preprocess,
    "trend": _cmd_trend,
    "forecast": _cmd_forecast,
    "backtest": _cmd_backtest,
    "screen": _cmd_screen,
    "riskmap": _cmd_riskmap,
    "plot": _cmd_plot,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except EpitrendError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
