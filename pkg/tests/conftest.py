import pytest

from morphic.algebroid import LieAlgebroid
from morphic.expr import Chart, SampleSpec


@pytest.fixture
def plane():
    return Chart.make(["x1", "x2"])


@pytest.fixture
def space():
    return Chart.make(["x1", "x2", "x3"])


@pytest.fixture
def spec():
    return SampleSpec()


def heisenberg_constants():
    C = [[[0] * 3 for _ in range(3)] for _ in range(3)]
    C[0][1][2] = 1
    C[1][0][2] = -1
    return C


@pytest.fixture
def heisenberg():
    return LieAlgebroid.lie_algebra(heisenberg_constants())


_criteria = {}


@pytest.fixture
def criterion():
    """Record and print one pass/fail line for an acceptance criterion."""

    def record(number, ok, detail):
        line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail.rstrip()}"
        _criteria[number] = line
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _criteria:
        terminalreporter.write_sep("=", "acceptance criteria")
        for number in sorted(_criteria):
            terminalreporter.write_line(_criteria[number])
