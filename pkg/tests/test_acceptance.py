"""Acceptance criteria, each at its stated tolerance.

Every test prints one PASS/FAIL line (visible with ``pytest -s`` or in the
terminal summary via ``-rA``).
"""

import os

import pytest

from imdrx.acceptance import CHECKS, run_check


@pytest.mark.acceptance
@pytest.mark.parametrize("number", sorted(CHECKS))
def test_criterion(number, capsys):
    result = run_check(number, workers=os.cpu_count() or 1)
    with capsys.disabled():
        print("\n" + result.line())
    assert result.passed, result.line()
