from __future__ import annotations

import pytest

from mokkt.catalog import load
from mokkt.problem import Problem


@pytest.fixture(scope="session")
def p1() -> Problem:
    return load("p1-biobjective-convex").problem


@pytest.fixture(scope="session")
def example1() -> Problem:
    return load("paper-example-1").problem


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(RESULTS):
        terminalreporter.write_line(RESULTS[n])
