import numpy as np
import pytest

from rydgate.pulses import available, load_pulse


@pytest.fixture(scope="session")
def to_pulse():
    return load_pulse("TO")


@pytest.fixture(scope="session")
def ar_pulse():
    return load_pulse("AR")


@pytest.fixture(scope="session")
def dr_pulse():
    return load_pulse("DR")


def shipped(name):
    if name not in available():
        pytest.skip(f"pulse {name} not shipped")
    return load_pulse(name)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one summary line per acceptance criterion, printed at the end of the run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
