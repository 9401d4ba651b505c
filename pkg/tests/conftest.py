import datetime as dt

import numpy as np
import pytest

from marketgeom.data_ingest import PricePanel
from marketgeom.returns import NormalizedWindow, normalize_rows

_REPORT: list[tuple[str, bool, str]] = []


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def acceptance_report():
    """Collects one (criterion, passed, detail) line per acceptance check."""
    return _REPORT


def pytest_terminal_summary(terminalreporter):
    if not _REPORT:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in _REPORT:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")


def make_panel(prices, start=dt.date(2021, 1, 4), tickers=None):
    prices = np.asarray(prices, dtype=float)
    T, N = prices.shape
    dates = [start + dt.timedelta(days=i) for i in range(T)]
    tickers = tickers or [f"T{k}" for k in range(N)]
    return PricePanel(dates, tickers, prices)


def random_window(rng, N, n, factor=0.0):
    raw = rng.standard_normal((N, n)) + factor * rng.standard_normal((1, n))
    vectors, means, stds = normalize_rows(raw)
    return NormalizedWindow(0, n, vectors, tuple(f"S{k}" for k in range(N)), means, stds), raw
