import warnings
from functools import lru_cache

import pytest

from epicon import preset
from epicon.errors import MaxItersExceeded
from epicon.solver import SolverConfig, solve

ACCEPTANCE_LINES = {}


@lru_cache(maxsize=None)
def solved(name, method=None):
    """Session-wide cache of full-horizon solves (solves are deterministic)."""
    sc = preset(name)
    if method is None:
        method = "fbsm" if (sc.cost.q > 1.0).all() else "projected_gradient"
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", MaxItersExceeded)
        return solve(sc, SolverConfig(method=method))


@pytest.fixture
def solved_cache():
    return solved


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])
