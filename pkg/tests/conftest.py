import numpy as np
import pytest

from specmult.kato import potential_from_spec
from specmult.radial import build_grid

ACCEPTANCE_LINES: dict = {}


def report_criterion(number: int, title: str, passed: bool, detail: str) -> None:
    """Record one acceptance line; printed in the terminal summary."""
    ACCEPTANCE_LINES[number] = f"criterion {number:2d} {'PASS' if passed else 'FAIL'}  {title}: {detail}"


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])


@pytest.fixture(scope="session")
def small_grid():
    return build_grid(8.0, 160)


@pytest.fixture(scope="session")
def medium_grid():
    return build_grid(10.0, 200)


@pytest.fixture(scope="session")
def well3_small(small_grid):
    return potential_from_spec("well:depth=3,radius=1", small_grid)


@pytest.fixture(scope="session")
def shallow_small(small_grid):
    return potential_from_spec("well:depth=0.5,radius=1", small_grid)


@pytest.fixture
def rng():
    return np.random.default_rng(42)
