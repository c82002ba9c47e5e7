"""One pass/fail line per acceptance criterion, at the contract tolerances.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the report lines.
"""

import subprocess
import sys
import time

import pytest

from qhorn.selftest import CRITERIA, run_check

SELFTEST_BUDGET = 180.0


@pytest.mark.parametrize("number", [c[0] for c in CRITERIA], ids=[f"criterion_{c[0]}" for c in CRITERIA])
def test_criterion(number):
    r = run_check(number)
    print(r.line())
    assert r.passed, r.line()


def test_criterion_10_selftest_end_to_end():
    t0 = time.perf_counter()
    proc = subprocess.run(
        [sys.executable, "-m", "qhorn.cli", "selftest"], capture_output=True, text=True, timeout=SELFTEST_BUDGET
    )
    dt = time.perf_counter() - t0
    ok = proc.returncode == 0 and dt < SELFTEST_BUDGET
    summary = proc.stdout.strip().splitlines()[-1] if proc.stdout.strip() else proc.stderr.strip()
    line = f"[{'PASS' if ok else 'FAIL'}] 10. selftest end to end: exit {proc.returncode}, {summary} ({dt:.2f}s of {SELFTEST_BUDGET:g}s)"
    print(line)
    assert ok, line
