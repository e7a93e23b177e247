"""Acceptance criteria E1-E10, each at its stated tolerance and budget.

Run alone with ``pytest tests/test_acceptance.py -s`` or
``python3 tests/test_acceptance.py``; one PASS/FAIL line is printed per
criterion.
"""
import sys

import pytest

from reducto.harness import EXPERIMENTS, HarnessConfig, run_experiment

try:
    from conftest import ACCEPTANCE_LINES
except ImportError:  # run as a script
    ACCEPTANCE_LINES = []

ORDER = ["consistency", "oaa-bound", "regret-tightness", "striping", "contract", "scaling",
         "dominance", "search-vs-independent", "ips", "persistence"]


def _run(name):
    report = run_experiment(HarnessConfig(name))
    tag = f"{report.label} {name}"
    for c in report.criteria:
        line = f"{'PASS' if c.passed else 'FAIL'} {tag}: {c.line()[6:]}"
        print(line)
        ACCEPTANCE_LINES.append(line)
    return report


@pytest.mark.parametrize("name", ORDER, ids=[f"{EXPERIMENTS[n].label}-{n}" for n in ORDER])
def test_criterion(name):
    report = _run(name)
    failed = [c.line() for c in report.criteria if not c.passed]
    assert not failed, "\n".join(failed)


if __name__ == "__main__":
    results = [_run(n) for n in ORDER]
    sys.exit(0 if all(r.passed for r in results) else 1)
