import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from hopsat.cnf import CnfFormula  # noqa: E402

# (not x1 or x2 or x3) and (x1 or x3 or x4), 1-based
EXAMPLE_CLAUSES = [[-1, 2, 3], [1, 3, 4]]


@pytest.fixture
def example_formula():
    return CnfFormula.from_ints(4, EXAMPLE_CLAUSES)


def pytest_terminal_summary(terminalreporter):
    from helpers import ACCEPTANCE
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
