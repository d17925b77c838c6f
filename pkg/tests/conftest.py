import numpy as np
import pytest

from bsrs_lab.mdp import GridworldSpec, build_gridworld
from bsrs_lab.operators import solve

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def grid7():
    return build_gridworld(GridworldSpec(7, 7, goal=(6, 6), gamma=0.8))


@pytest.fixture(scope="session")
def grid7_qstar(grid7):
    return solve(grid7)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
