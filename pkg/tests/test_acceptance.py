"""Acceptance criteria, each at its stated tolerance.

Criteria that cannot be met at the stated parameters are run as stated and
fail; the terminal summary prints one PASS/FAIL line per criterion.
"""
from __future__ import annotations

import subprocess
import sys
from pathlib import Path

import pytest

import acceptance_criteria as ac
from conftest import ACCEPTANCE_RESULTS

pytestmark = pytest.mark.acceptance

# CSV text of every criterion computed in this session (the first run for criterion 12)
FIRST_RUN: dict = {}


def _check(key):
    outcome = ac.CRITERIA[key]()
    FIRST_RUN[key] = outcome.csv
    ACCEPTANCE_RESULTS[str(key)] = (outcome.passed, outcome.summary)
    assert outcome.passed, outcome.summary


@pytest.mark.parametrize("key", list(ac.CRITERIA), ids=[f"criterion_{k}" for k in ac.CRITERIA])
def test_criterion(key):
    _check(key)


def test_criterion_12_determinism(tmp_path):
    first, second = tmp_path / "first", tmp_path / "second"
    ac.write_all(first, FIRST_RUN)
    script = Path(ac.__file__)
    subprocess.run([sys.executable, str(script), str(second)], check=True, cwd=script.parent)
    differing = [p.name for p in sorted(first.iterdir()) if p.read_bytes() != (second / p.name).read_bytes()]
    summary = f"{len(list(first.iterdir()))} CSV files, differing: {differing or 'none'}"
    ACCEPTANCE_RESULTS["12"] = (not differing, summary)
    assert not differing, summary
