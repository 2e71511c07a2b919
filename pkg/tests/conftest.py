import numpy as np
import pytest

from brl.numerics import RandomStream


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def stream():
    return RandomStream(7, 11)


def pytest_terminal_summary(terminalreporter):
    from _acceptance_log import RESULTS

    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(RESULTS):
        terminalreporter.write_line(RESULTS[number])
