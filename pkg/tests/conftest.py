import math
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from peglab import Problem, SolveConfig, make_ellipse, solve  # noqa: E402

FAST = SolveConfig(grid_per_axis=12)

# criterion id -> (passed, detail); filled by test_acceptance, printed at the end
ACCEPTANCE_LINES = {}


@pytest.fixture(scope="session")
def ellipse():
    return make_ellipse(2.0, 1.0)


@pytest.fixture(scope="session")
def ellipse_report(ellipse):
    return solve(ellipse, Problem.rectangle(math.pi / 3), FAST)


@pytest.fixture(scope="session")
def square_report(ellipse):
    return solve(ellipse, Problem.rectangle(right_angle=True), FAST)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        ok, detail = ACCEPTANCE_LINES[key]
        terminalreporter.write_line(f"criterion {key:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
