"""Acceptance suite: one PASS/FAIL line per criterion on stdout.

Tolerances live in ``schrodinger_lab.acceptance`` next to each check.
"""

import pytest

from schrodinger_lab.acceptance import CRITERIA


@pytest.mark.parametrize("number", sorted(CRITERIA), ids=lambda i: f"criterion_{i:02d}")
def test_criterion(number, capsys):
    result = CRITERIA[number]()
    with capsys.disabled():
        print("\n" + result.line())
    assert result.passed, result.line()
