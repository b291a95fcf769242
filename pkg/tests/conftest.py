import numpy as np
import pytest

from sparsesync.model import validate_frame_config

# 101-tap simulation channel with 10 nonzero taps
PAPER_TAPS = {0: -0.5, 7: 0.1, 14: 0.9, 33: -0.3, 49: 0.5, 51: -0.25,
              69: -0.3, 73: 0.3, 89: 0.4, 100: -0.1}
PAPER_BOUNDARY = 500


def paper_channel():
    h = np.zeros(101, dtype=np.complex128)
    for i, v in PAPER_TAPS.items():
        h[i] = v
    return h


@pytest.fixture
def paper_h():
    return paper_channel()


@pytest.fixture
def paper_frame():
    return validate_frame_config(1000, 100, 148, 4, "BPSK")


@pytest.fixture
def usrp_frame():
    return validate_frame_config(100, 5, 43, 10, "QPSK")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def crandn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
