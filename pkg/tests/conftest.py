import numpy as np
import pytest

from stressdetect.data import BADGE_FEATURES, PHYS_FEATURES, TimeSeries


def constant_channels(names, start, rate, n, offset=0.0):
    """One TimeSeries per name whose value encodes (channel index, sample index)."""
    return {name: TimeSeries(name, start, rate, offset + 1000.0 * j + np.arange(n))
            for j, name in enumerate(names)}


@pytest.fixture
def grid_channels():
    def make(phys_start=0.0, phys_rate=10.0, phys_n=1001, badge_start=0.0, badge_rate=10.0,
             badge_n=1001):
        return (constant_channels(PHYS_FEATURES, phys_start, phys_rate, phys_n),
                constant_channels(BADGE_FEATURES, badge_start, badge_rate, badge_n))
    return make


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    import sys
    module = sys.modules.get("test_acceptance")
    results = getattr(module, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for number in sorted(results):
            terminalreporter.write_line(results[number])
