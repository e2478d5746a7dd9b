"""Color-coded epidemic risk classification per region.

A region is grey when testing data is missing or too sparse to trust the
case counts, green at low forecast incidence, and orange or red at high
incidence depending on whether the reproduction number indicates a
descending or an ascending/plateauing epidemic. The reproduction number is
an externally supplied input here, read from ``reff.csv``
(``region,date,r_eff``); testing rates come from ``tests.csv``
(``region,tests_per_million``) and populations from ``populations.csv``
(``region,population``).
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from datetime import date
from typing import Optional

from .errors import DataFormatError, RowParseError
from .ingest import RegionKey

__all__ = [
    "RiskInput",
    "RiskAssessment",
    "classify",
    "read_reff_csv",
    "read_tests_csv",
    "read_population_csv",
    "write_riskmap_csv",
]

MIN_TESTS_PER_MILLION = 10_000.0
GREEN_INCIDENCE_MAX = 30.0  # weekly cases per 100K inhabitants
R_EFF_DESCENDING = 0.9


@dataclass
class RiskInput:
    region: RegionKey
    forecast_weekly_cases: float
    r_eff: Optional[float] = None
    tests_per_million: Optional[float] = None

    def __post_init__(self):
        if self.forecast_weekly_cases < 0:
            raise ValueError("forecast_weekly_cases must be non-negative")


@dataclass
class RiskAssessment:
    color: str  # green | orange | red | grey
    incidence: Optional[float] = None
    r_eff: Optional[float] = None
    diagnostic: Optional[str] = None


def classify(inp: RiskInput) -> RiskAssessment:
    """Assign green/orange/red/grey from incidence, R-eff and testing rate.

    Grey: tests per million missing or below 10,000, or no population to
    normalise by. Green: forecast weekly incidence below 30 per 100K (R-eff
    is deliberately ignored there, it is unreliable at low counts). Orange:
    higher incidence with R-eff below 0.9. Red: higher incidence with R-eff
    at or above 0.9, or unknown; an exactly-0.9 or missing R-eff maps to red
    as the conservative reading.
    """
    tests = inp.tests_per_million
    if tests is None or tests < MIN_TESTS_PER_MILLION:
        return RiskAssessment(color="grey", diagnostic="insufficient testing data")
    if inp.region.population is None:
        return RiskAssessment(color="grey", diagnostic="population unknown")
    incidence = 100_000.0 * inp.forecast_weekly_cases / inp.region.population
    if incidence < GREEN_INCIDENCE_MAX:
        return RiskAssessment(color="green", incidence=incidence, r_eff=inp.r_eff)
    if inp.r_eff is not None and inp.r_eff < R_EFF_DESCENDING:
        return RiskAssessment(color="orange", incidence=incidence, r_eff=inp.r_eff)
    diagnostic = None if inp.r_eff is not None else "R-eff missing at high incidence"
    return RiskAssessment(color="red", incidence=incidence, r_eff=inp.r_eff, diagnostic=diagnostic)


def _read_rows(csv_bytes, expected_header: list[str]):
    text = csv_bytes.decode("utf-8") if isinstance(csv_bytes, (bytes, bytearray)) else csv_bytes
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise DataFormatError("empty input, expected a header row")
    if [c.strip() for c in header] != expected_header:
        raise DataFormatError(f"malformed header: expected {','.join(expected_header)}")
    for idx, row in enumerate(reader, start=1):
        if not row or not any(c.strip() for c in row):
            continue
        if len(row) != len(expected_header):
            raise RowParseError(idx, f"expected {len(expected_header)} cells")
        yield idx, [c.strip() for c in row]


def read_reff_csv(csv_bytes, as_of: Optional[date] = None) -> dict[str, float]:
    """Latest R-eff per region at or before ``as_of`` (or overall)."""
    latest: dict[str, tuple[date, float]] = {}
    for idx, (region, date_str, value) in _read_rows(csv_bytes, ["region", "date", "r_eff"]):
        try:
            day = date.fromisoformat(date_str)
            r = float(value)
        except ValueError:
            raise RowParseError(idx, "bad date or R-eff value")
        if as_of is not None and day > as_of:
            continue
        if region not in latest or day > latest[region][0]:
            latest[region] = (day, r)
    return {region: r for region, (_, r) in latest.items()}


def read_tests_csv(csv_bytes) -> dict[str, float]:
    out = {}
    for idx, (region, value) in _read_rows(csv_bytes, ["region", "tests_per_million"]):
        try:
            out[region] = float(value)
        except ValueError:
            raise RowParseError(idx, "bad tests_per_million value")
    return out


def read_population_csv(csv_bytes) -> dict[str, int]:
    out = {}
    for idx, (region, value) in _read_rows(csv_bytes, ["region", "population"]):
        try:
            out[region] = int(float(value))
        except ValueError:
            raise RowParseError(idx, "bad population value")
    return out


def write_riskmap_csv(assessments: dict[str, RiskAssessment]) -> bytes:
    lines = ["region,color,incidence,r_eff"]
    for region in sorted(assessments):
        a = assessments[region]
        incidence = "" if a.incidence is None else f"{a.incidence:.6g}"
        r_eff = "" if a.r_eff is None else f"{a.r_eff:.6g}"
        lines.append(f"{region},{a.color},{incidence},{r_eff}")
    return ("\n".join(lines) + "\n").encode("utf-8")
