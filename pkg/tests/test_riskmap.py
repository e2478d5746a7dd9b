from datetime import date

import pytest

from epitrend.ingest import RegionKey
from epitrend.riskmap import (
    RiskInput,
    classify,
    read_population_csv,
    read_reff_csv,
    read_tests_csv,
    write_riskmap_csv,
)


def _region(population=1_000_000):
    return RegionKey(country="Zubrowka", population=population)


def _input(weekly=100.0, r_eff=None, tests=None, population=1_000_000):
    return RiskInput(
        region=_region(population),
        forecast_weekly_cases=weekly,
        r_eff=r_eff,
        tests_per_million=tests,
    )


class TestClassify:
    def test_sparse_testing_is_grey(self):
        assert classify(_input(tests=5_000.0)).color == "grey"

    def test_missing_testing_is_grey(self):
        assert classify(_input(tests=None)).color == "grey"

    def test_low_incidence_is_green(self):
        # 100 weekly cases per 1M inhabitants = 10 per 100K, below 30
        a = classify(_input(weekly=100.0, tests=20_000.0))
        assert a.color == "green"
        assert a.incidence == pytest.approx(10.0)

    def test_high_incidence_descending_is_orange(self):
        a = classify(_input(weekly=500.0, r_eff=0.8, tests=20_000.0))
        assert a.color == "orange"
        assert a.incidence == pytest.approx(50.0)

    def test_high_incidence_ascending_is_red(self):
        assert classify(_input(weekly=500.0, r_eff=1.2, tests=20_000.0)).color == "red"

    def test_r_eff_boundary_goes_red(self):
        assert classify(_input(weekly=500.0, r_eff=0.9, tests=20_000.0)).color == "red"

    def test_missing_r_eff_at_high_incidence_is_red_with_diagnostic(self):
        a = classify(_input(weekly=500.0, r_eff=None, tests=20_000.0))
        assert a.color == "red"
        assert a.diagnostic is not None

    def test_missing_population_is_grey(self):
        assert classify(_input(tests=20_000.0, population=None)).color == "grey"

    def test_monotone_in_incidence(self):
        order = {"green": 0, "orange": 1, "red": 2}
        last = 0
        for weekly in [0.0, 100.0, 290.0, 300.0, 600.0, 5_000.0]:
            color = classify(_input(weekly=weekly, r_eff=0.8, tests=20_000.0)).color
            assert order[color] >= last
            last = order[color]

    def test_r_eff_is_ignored_when_green(self):
        for r in (None, 0.1, 0.9, 5.0):
            assert classify(_input(weekly=100.0, r_eff=r, tests=20_000.0)).color == "green"


class TestIo:
    def test_reff_reader_takes_latest_at_or_before_as_of(self):
        data = (
            "region,date,r_eff\n"
            "Zubrowka,2021-01-01,1.4\n"
            "Zubrowka,2021-02-01,0.8\n"
            "Zubrowka,2021-03-01,2.0\n"
        ).encode()
        assert read_reff_csv(data, as_of=date(2021, 2, 15)) == {"Zubrowka": 0.8}
        assert read_reff_csv(data) == {"Zubrowka": 2.0}

    def test_tests_and_population_readers(self):
        assert read_tests_csv(b"region,tests_per_million\nA,12000\n") == {"A": 12000.0}
        assert read_population_csv(b"region,population\nA,5000000\n") == {"A": 5000000}

    def test_riskmap_writer_sorted_and_parseable(self):
        out = write_riskmap_csv(
            {
                "B": classify(_input(weekly=500.0, r_eff=1.0, tests=20_000.0)),
                "A": classify(_input(tests=None)),
            }
        ).decode()
        lines = out.strip().split("\n")
        assert lines[0] == "region,color,incidence,r_eff"
        assert lines[1].startswith("A,grey,,")
        assert lines[2].startswith("B,red,50,1")
