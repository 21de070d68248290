import sys
from functools import lru_cache
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from degen_mixed import problems  # noqa: E402


@lru_cache(maxsize=None)
def built(name, k=None, seed=0, **params):
    """Cached builds shared across test modules (systems are immutable)."""
    if k is not None:
        params["k"] = k
    return problems.build(problems.ProblemRecipe(name, params, seed=seed))


@pytest.fixture(scope="session")
def stokes8():
    return built("stokes-mms", 8)


@pytest.fixture(scope="session")
def eddy8():
    return built("eddy2d-conductor", 8)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
