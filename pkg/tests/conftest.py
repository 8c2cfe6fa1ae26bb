import sys
import warnings
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from qarrival.capdesign import DesignSpec, optimize  # noqa: E402
from qarrival.capscatter import get_evolution  # noqa: E402
from qarrival.wavepacket import FIGURE1  # noqa: E402


@pytest.fixture(scope="session")
def designed():
    """The default four-layer design, seed 0."""
    return optimize(DesignSpec(), seed=0)


@pytest.fixture(scope="session")
def evolution(designed):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return get_evolution(designed.potential, FIGURE1)


@pytest.fixture(scope="session")
def stats(evolution):
    return evolution.statistics()


ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
