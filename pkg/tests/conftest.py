from datetime import date

import numpy as np
import pytest

from epitrend.ingest import DailySeries, RegionKey


START = date(2020, 4, 1)


@pytest.fixture
def rng():
    return np.random.default_rng(20200401)


def make_series(values, region="Testland", kind="cases", start=START):
    vals = [None if v is None else float(v) for v in values]
    return DailySeries(RegionKey(country=region), start, vals, kind)


@pytest.fixture
def series_factory():
    return make_series
