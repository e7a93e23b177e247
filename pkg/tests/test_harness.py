import json

import pytest

from reducto.datagen import BadDelta
from reducto.harness import (
    EXPERIMENTS, HarnessConfig, Report, UnknownExperiment, experiment, run_experiment,
)


def test_unknown_experiment():
    with pytest.raises(UnknownExperiment):
        HarnessConfig("fig3")


def test_delta_range():
    with pytest.raises(BadDelta):
        HarnessConfig("consistency", delta=1 / 12)


def test_all_ids_present():
    required = {"consistency", "oaa-bound", "regret-tightness", "striping", "dominance",
                "search-vs-independent", "ips", "scaling"}
    assert required <= set(EXPERIMENTS)


def test_report_lines_and_json(tmp_path):
    r = Report("x", "E0")
    r.check("a", True, 1.5, "> 1")
    r.check("b", False, 0, "1")
    assert not r.passed
    lines = r.lines()
    assert lines[0].startswith("FAIL E0 x")
    assert lines[1].strip().startswith("PASS  a: 1.5")
    assert json.loads(r.to_json())["passed"] is False


def test_small_runs(tmp_path):
    path = tmp_path / "r.json"
    rep = run_experiment(HarnessConfig("regret-tightness", n=500, report=str(path)))
    assert rep.passed and json.loads(path.read_text())["experiment"] == "regret-tightness"
    assert experiment("striping", n=200).passed
    assert experiment("contract", n=100).passed
