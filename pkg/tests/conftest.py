import json
from pathlib import Path

import numpy as np
import pytest

from ccpdhg.lp import LinearProgram
from ccpdhg.sparse import SparseMatrix

DATA = Path(__file__).parent / "data"


@pytest.fixture
def two_var():
    """min x1 + 2 x2  s.t.  x1 + x2 = 2,  x >= 0  (optimum x = (2, 0), y = 1)."""
    return LinearProgram(c=np.array([1.0, 2.0]), A=SparseMatrix.from_dense([[1.0, 1.0]]), b=np.array([2.0]))


@pytest.fixture(scope="session")
def optima():
    return json.loads((DATA / "optima.json").read_text())


def regression_models():
    return sorted(p.stem for p in DATA.glob("*.mps"))


ACCEPTANCE = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[ACCEPTANCE] = []


@pytest.fixture
def criterion(request):
    """``criterion(name, ok, detail)`` logs one PASS/FAIL line, then asserts."""
    lines = request.config.stash[ACCEPTANCE]

    def check(name, ok, detail=""):
        lines.append(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
        assert ok, f"{name}: {detail}"

    return check


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
