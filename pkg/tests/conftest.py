import numpy as np
import pytest

from kgmvortex.cylgrid import CylGrid

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def small_grid():
    return CylGrid(6.0, 6.0, 16, 20)


@pytest.fixture
def rng():
    return np.random.default_rng(20261014)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
