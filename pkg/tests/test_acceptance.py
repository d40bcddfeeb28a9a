"""Acceptance criteria at full size; each prints one pass/fail line."""
import time

import pytest

import conftest
from projgauge.cli import RunConfig, cmd_verify
from projgauge.suite import CRITERIA, SuiteSettings, run_criterion

FULL = SuiteSettings.make(False)


def _report(number, name, passed, elapsed, budget=None):
    limit = f" / {budget:.0f} s" if budget else ""
    line = f"[{'PASS' if passed else 'FAIL'}] criterion {number:2d} {name} ({elapsed:.1f} s{limit})"
    conftest.ACCEPTANCE_LINES.append(line)
    print(line)


@pytest.mark.slow
@pytest.mark.parametrize("number", sorted(CRITERIA))
def test_criterion(number):
    name, budget = CRITERIA[number]
    t0 = time.perf_counter()
    result = run_criterion(number, FULL, conftest.SEED)
    elapsed = time.perf_counter() - t0
    within = elapsed < budget
    _report(number, name, result.passed and within, elapsed, budget)
    for check in result.checks:
        print(check)
    assert result.passed, result.positive_failures or [c["name"] for c in result.checks if not c["passed"]]
    assert within, f"{elapsed:.1f} s exceeds {budget} s"


@pytest.mark.slow
def test_criterion_11_determinism(tmp_path):
    t0 = time.perf_counter()
    paths = []
    for sub in ("a", "b"):
        cfg = RunConfig(quick=True, seed=conftest.SEED, out=str(tmp_path / sub))
        path, _ = cmd_verify(cfg)
        paths.append(path)
    same = paths[0].read_bytes() == paths[1].read_bytes()
    _report(11, "determinism", same, time.perf_counter() - t0)
    assert same
