import functools

import numpy as np
import pytest

from twophase.dual import solve_two_phase
from twophase.problems import EXAMPLES

# lines reported by the acceptance module, printed at the end of the run
ACCEPTANCE_LINES: list[str] = []


@functools.lru_cache(maxsize=None)
def solved(example: int, level: int, tol: float = 1e-9):
    problem = EXAMPLES[example]()
    return problem, solve_two_phase(problem.mesh(level), problem, tol=tol)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
