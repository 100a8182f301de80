import math
import warnings

import numpy as np
import pytest

ACCEPTANCE_LINES = []


def square():
    return np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])


def hexagon(radius=1.0):
    t = np.arange(6) * (math.pi / 3)
    return radius * np.column_stack([np.cos(t), np.sin(t)])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(autouse=True)
def _quiet_collinear():
    with warnings.catch_warnings():
        warnings.filterwarnings("ignore", message="collinear input")
        yield


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
