import numpy as np
import pytest

from asl import SensingOracle, SignalInstance, SupportSet


def make_oracle(cls, indices, mu, seed=0, **kw):
    support = SupportSet(indices, cls)
    return SensingOracle(SignalInstance(support, mu), np.random.default_rng(seed), **kw), support


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, shown after the test summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
