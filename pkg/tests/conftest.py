import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from gldual.grid import DomainSpec, build_grid  # noqa: E402
from gldual.model import ModelParams  # noqa: E402

# filled by tests/test_acceptance.py, printed at the end of the session
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def grid1d(n, extent=1.0):
    return build_grid(DomainSpec(1, (extent,), n))


def grid2d(n, extent=(1.0, 1.0)):
    return build_grid(DomainSpec(2, extent, n))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def g1():
    return grid1d(21)


@pytest.fixture
def g2():
    return grid2d(8)


@pytest.fixture
def stable():
    return ModelParams(gamma=1.0, alpha=1.0, beta=1.0)
