"""Parsing of raw count data and serialization of quantile forecasts.

Three file formats cross this boundary: the public wide cumulative layout
(one row per region, one date column per day), an internal long layout
(``region,date,value`` with blank values for missing reports), and the
forecast-hub quantile exchange CSV. All files are UTF-8, comma-delimited,
with ``\\n`` line endings and ``.`` decimal separators.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from datetime import date, datetime, timedelta
from typing import Iterable, Optional, Sequence

from .errors import ConflictError, DataFormatError, IntegrityError, RowParseError

__all__ = [
    "RegionKey",
    "DailySeries",
    "parse_jhu_wide",
    "parse_long",
    "write_long",
    "write_hub_quantiles",
    "HUB_HEADER",
]

_WIDE_FIXED_COLUMNS = ["Province/State", "Country/Region", "Lat", "Long"]
HUB_HEADER = "forecast_date,target,target_end_date,location,type,quantile,value"


@dataclass(frozen=True)
class RegionKey:
    """Identifies a reporting region plus optional denominators."""

    country: str
    subregion: Optional[str] = None
    population: Optional[int] = None
    tests_per_million: Optional[float] = None

    def __post_init__(self):
        if not self.country:
            raise ValueError("country must be non-empty")
        if self.population is not None and self.population <= 0:
            raise ValueError("population must be positive when present")
        if self.tests_per_million is not None and self.tests_per_million < 0:
            raise ValueError("tests_per_million must be non-negative")

    @property
    def label(self) -> str:
        return f"{self.country}/{self.subregion}" if self.subregion else self.country


@dataclass
class DailySeries:
    """Dated sequence of daily counts; ``None`` marks a missing report."""

    region: RegionKey
    start_date: date
    values: list
    kind: str = "cases"

    def __post_init__(self):
        if self.kind not in ("cases", "deaths"):
            raise ValueError(f"kind must be 'cases' or 'deaths', got {self.kind!r}")
        if len(self.values) < 1:
            raise ValueError("series must contain at least one day")
        for v in self.values:
            if v is not None and not (float("-inf") < float(v) < float("inf")):
                raise ValueError("present values must be finite")

    def dates(self) -> list[date]:
        return [self.start_date + timedelta(days=i) for i in range(len(self.values))]


def _decode(csv_bytes) -> io.StringIO:
    if isinstance(csv_bytes, (bytes, bytearray)):
        return io.StringIO(csv_bytes.decode("utf-8"))
    if isinstance(csv_bytes, str):
        return io.StringIO(csv_bytes)
    return io.StringIO(csv_bytes.read().decode("utf-8"))


def _parse_wide_date(token: str) -> date:
    try:
        return datetime.strptime(token.strip(), "%m/%d/%y").date()
    except ValueError as exc:
        raise DataFormatError(f"unparseable date column {token!r}") from exc


def parse_jhu_wide(csv_bytes, kind: str = "cases") -> list[DailySeries]:
    """Parse the wide cumulative layout into daily series.

    Daily values are first differences of the cumulative row, with the first
    day equal to the first cumulative value. Negative differences are kept
    as-is; the preprocessing stage deals with them.
    """
    reader = csv.reader(_decode(csv_bytes))
    try:
        header = next(reader)
    except StopIteration:
        raise DataFormatError("empty input, expected a header row")
    if [c.strip() for c in header[:4]] != _WIDE_FIXED_COLUMNS:
        raise DataFormatError(
            "malformed header: expected columns "
            + ",".join(_WIDE_FIXED_COLUMNS)
            + " followed by date columns"
        )
    date_cols = [_parse_wide_date(c) for c in header[4:]]
    if not date_cols:
        raise DataFormatError("header contains no date columns")
    for prev, cur in zip(date_cols, date_cols[1:]):
        if (cur - prev).days != 1:
            raise DataFormatError("date columns must be consecutive calendar days")

    out: list[DailySeries] = []
    for row_idx, row in enumerate(reader, start=1):
        if not row or not any(cell.strip() for cell in row):
            continue
        if len(row) != 4 + len(date_cols):
            raise RowParseError(row_idx, f"expected {4 + len(date_cols)} cells, got {len(row)}")
        subregion = row[0].strip() or None
        country = row[1].strip()
        try:
            cumulative = [float(cell) for cell in row[4:]]
        except ValueError:
            raise RowParseError(row_idx, "non-numeric cumulative cell")
        daily: list[Optional[float]] = [cumulative[0]]
        daily.extend(b - a for a, b in zip(cumulative, cumulative[1:]))
        out.append(
            DailySeries(
                region=RegionKey(country=country, subregion=subregion),
                start_date=date_cols[0],
                values=daily,
                kind=kind,
            )
        )
    return out


def parse_long(csv_bytes, kind: str = "cases") -> list[DailySeries]:
    """Parse ``region,date,value`` rows into per-region series.

    Dates are ISO; a blank value is a missing report. Days absent between a
    region's first and last dates are materialised as missing.
    """
    reader = csv.reader(_decode(csv_bytes))
    try:
        header = next(reader)
    except StopIteration:
        raise DataFormatError("empty input, expected a header row")
    if [c.strip() for c in header] != ["region", "date", "value"]:
        raise DataFormatError("malformed header: expected region,date,value")

    by_region: dict[str, dict[date, Optional[float]]] = {}
    order: list[str] = []
    for row_idx, row in enumerate(reader, start=1):
        if not row or not any(cell.strip() for cell in row):
            continue
        if len(row) != 3:
            raise RowParseError(row_idx, f"expected 3 cells, got {len(row)}")
        region, date_str, value_str = (cell.strip() for cell in row)
        try:
            day = date.fromisoformat(date_str)
        except ValueError:
            raise RowParseError(row_idx, f"out-of-range or malformed date {date_str!r}")
        value: Optional[float]
        if value_str == "":
            value = None
        else:
            try:
                value = float(value_str)
            except ValueError:
                raise RowParseError(row_idx, f"non-numeric value {value_str!r}")
        if region not in by_region:
            by_region[region] = {}
            order.append(region)
        if day in by_region[region]:
            raise ConflictError(f"duplicate entry for ({region}, {day.isoformat()})")
        by_region[region][day] = value

    out: list[DailySeries] = []
    for region in sorted(order):
        days = by_region[region]
        first, last = min(days), max(days)
        values = [days.get(first + timedelta(days=i)) for i in range((last - first).days + 1)]
        country, _, subregion = region.partition("/")
        out.append(
            DailySeries(
                region=RegionKey(country=country, subregion=subregion or None),
                start_date=first,
                values=values,
                kind=kind,
            )
        )
    return out


def write_long(series_list: Iterable, float_format: str = "%.6g") -> bytes:
    """Serialise series (raw or cleaned) to the long layout."""
    buf = io.StringIO()
    buf.write("region,date,value\n")
    for series in series_list:
        values = series.values
        start = series.start_date
        label = series.region.label
        for i, v in enumerate(values):
            day = (start + timedelta(days=i)).isoformat()
            if v is None:
                buf.write(f"{label},{day},\n")
            else:
                buf.write(f"{label},{day},{_format_value(float(v), float_format)}\n")
    return buf.getvalue().encode("utf-8")


def _format_value(v: float, fmt: str = "%.6g") -> str:
    if v == int(v) and abs(v) < 1e15:
        return str(int(v))
    return fmt % v


def write_hub_quantiles(forecasts: Sequence, origin_date: date) -> bytes:
    """Serialise weekly quantile forecasts to the hub exchange CSV.

    Each forecast contributes one point row plus its 23 quantile rows. Rows
    are ordered by (location, target, quantile) with the point row first
    within each block. Non-monotone or negative quantiles are refused.
    """
    blocks = []
    for fc in forecasts:
        if fc.target_type != "weekly_total":
            raise IntegrityError("hub output accepts weekly_total targets only")
        q = [float(v) for v in fc.quantiles]
        if len(q) != 23:
            raise IntegrityError(f"expected 23 quantiles, got {len(q)}")
        if any(b < a for a, b in zip(q, q[1:])):
            raise IntegrityError(f"non-monotone quantiles for {fc.region.label}")
        if min(q) < 0 or fc.point < 0:
            raise IntegrityError(f"negative forecast value for {fc.region.label}")
        k = fc.target_step
        unit = "case" if fc.kind == "cases" else "death"
        target = f"{k} wk ahead inc {unit}"
        end = origin_date + timedelta(days=7 * k)
        blocks.append((fc.region.label, target, end, float(fc.point), q, fc.levels))

    buf = io.StringIO()
    buf.write(HUB_HEADER + "\n")
    for location, target, end, point, q, levels in sorted(blocks, key=lambda b: (b[0], b[1])):
        common = f"{origin_date.isoformat()},{target},{end.isoformat()},{location}"
        buf.write(f"{common},point,,{_format_hub_value(point)}\n")
        for level, value in zip(levels, q):
            buf.write(f"{common},quantile,{_format_level(level)},{_format_hub_value(value)}\n")
    return buf.getvalue().encode("utf-8")


def _format_level(level: float) -> str:
    return f"{level:.3f}".rstrip("0").rstrip(".") if level != int(level) else str(int(level))


def _format_hub_value(v: float) -> str:
    return f"{v:.6f}"
