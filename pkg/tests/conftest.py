from __future__ import annotations

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

# criterion key -> (passed, summary), filled by test_acceptance
ACCEPTANCE_RESULTS: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    order = ["1", "2", "3", "4", "5", "6", "7", "8a", "8b", "8c", "9", "10", "11", "12"]
    for key in order:
        if key in ACCEPTANCE_RESULTS:
            passed, summary = ACCEPTANCE_RESULTS[key]
            terminalreporter.write_line(f"criterion {key:>3}: {'PASS' if passed else 'FAIL'}  {summary}")
