import numpy as np
import pytest

from reducto import Example, Feature

ACCEPTANCE_LINES = []


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def make_example(pairs, label=None, importance=1.0):
    feats = tuple(Feature(i, v) for i, v in pairs)
    if label is None:
        return Example(feats, importance=importance)
    return Example(feats, label, importance)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
