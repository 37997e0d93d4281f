import csv
import json
import re

import numpy as np
import pytest

from tailscenario.bench import (
    CSV_HEADER,
    ExperimentConfig,
    ExperimentRecord,
    emit_outputs,
    run_efficiency_bench,
    run_quality_bench,
    summarize,
    verify_sets,
)
from tailscenario.cli import main
from tailscenario.scenario import CC_SC, EFF_SC, MEMORY_BUDGET, OPTIMAL, ScenarioProblem, SolveReport


def fake(method, delta, seed, value):
    rep = SolveReport(method, delta, 1e-5, 10, OPTIMAL, np.zeros(2), value, None, 0.5, seed)
    return ExperimentRecord(rep, 2, "toy", 0.001)


def test_config_validation(tmp_path):
    with pytest.raises(ValueError):
        ExperimentConfig("salvage-d10", delta_grid=[0.0])
    with pytest.raises(ValueError):
        ExperimentConfig("salvage-d10", repetitions=0)
    with pytest.raises(ValueError):
        ExperimentConfig("salvage-d10", methods=["Other"])
    with pytest.raises(ValueError):
        ExperimentConfig.from_dict({"problem": "salvage-d10", "colour": 1})
    cfg = ExperimentConfig("salvage-d10", delta_grid=[0.1], repetitions=3)
    path = tmp_path / "c.json"
    path.write_text(json.dumps(cfg.to_dict()))
    assert ExperimentConfig.load(path) == cfg


def test_efficiency_bench_counts():
    cfg = ExperimentConfig("salvage-d15", methods=[EFF_SC, CC_SC], delta_prime_rule="floor", row_cap=10**5)
    recs = run_efficiency_bench(cfg, evaluate=False)
    assert len(recs) == 14
    eff = [r.report.n_scenarios for r in recs if r.report.method == EFF_SC]
    cc = [r.report.n_scenarios for r in recs if r.report.method == CC_SC]
    assert len(set(eff)) == 1 and eff[0] <= 1906
    assert all(a > b for a, b in zip(cc, cc[1:]))
    assert cc[0] == 251083
    assert [r.report.status for r in recs[:2]] == [MEMORY_BUDGET] * 2  # CcSc, delta 0.001 and 0.002
    one = run_efficiency_bench(ExperimentConfig("salvage-d5", delta_grid=[0.1], methods=[EFF_SC]))
    assert len(one) == 1 and one[0].violation_prob is not None


def test_quality_bench_count_and_violation_presence():
    cfg = ExperimentConfig("salvage-d5", delta_grid=[0.05, 0.1], repetitions=3)
    recs = run_quality_bench(cfg)
    assert len(recs) == 12
    for r in recs:
        assert (r.violation_prob is not None) == (r.report.status == OPTIMAL)
    seeds = {m: sorted({r.report.seed for r in recs if r.report.method == m}) for m in (EFF_SC, CC_SC)}
    assert seeds[EFF_SC] == seeds[CC_SC]


def test_emit_outputs_structure(tmp_path):
    recs = [fake(m, d, s, 7.0) for m in (EFF_SC, CC_SC) for d in (0.01, 0.1) for s in range(3)]
    paths = emit_outputs(recs, tmp_path)
    lines = open(paths["csv"]).read().splitlines()
    assert len(lines) == 13
    assert tuple(next(csv.reader([lines[0]]))) == CSV_HEADER
    summary = json.load(open(paths["summary"]))
    for cell in summary["cells"]:
        assert set(cell["value"].values()) == {7.0}
    svg = open(paths["svg"]).read()
    for d in ("0.01", "0.1"):
        boxes = re.findall(rf'<g class="box" data-method="(\w+)" data-delta="{re.escape(d)}"', svg)
        # one box per method in each panel
        assert sorted(set(boxes)) == sorted([CC_SC, EFF_SC])
    assert svg.startswith("<svg") or svg.startswith("<?xml")
    with pytest.raises(ValueError):
        emit_outputs([], tmp_path)


def test_summary_ratio():
    recs = [fake(EFF_SC, 0.1, s, 2.0) for s in range(3)] + [fake(CC_SC, 0.1, s, 4.0) for s in range(3)]
    assert summarize(recs)["median_value_ratio_eff_over_cc"] == {"0.1": 0.5}


def test_outputs_reproducible(tmp_path):
    cfg = ExperimentConfig("salvage-d5", delta_grid=[0.05, 0.1], repetitions=2)
    a = emit_outputs(run_quality_bench(cfg), tmp_path / "a", timing=False)
    b = emit_outputs(run_quality_bench(cfg), tmp_path / "b", timing=False)
    for k in ("csv", "summary", "svg"):
        assert open(a[k], "rb").read() == open(b[k], "rb").read()


def test_parallel_matches_serial(tmp_path):
    cfg = ExperimentConfig("salvage-d5", delta_grid=[0.1], repetitions=2)
    par = ExperimentConfig("salvage-d5", delta_grid=[0.1], repetitions=2, n_workers=2)
    a = emit_outputs(run_quality_bench(cfg), tmp_path / "a", timing=False)
    b = emit_outputs(run_quality_bench(par), tmp_path / "b", timing=False)
    assert open(a["csv"]).read() == open(b["csv"]).read()


def test_verify_sets_salvage():
    res = verify_sets(ScenarioProblem.from_preset("salvage-d5"), 0.02, n=100, seed=1)
    assert res["containment"]["tested"] > 10
    assert res["containment"]["counterexamples"] == 0
    assert res["covering"]["misses"] == 0 and res["covering"]["draws"] > 0
    assert res["ok"]


def test_cli_solve_and_bench(tmp_path, capsys):
    assert main(["solve", "--preset", "salvage-d5", "--delta", "0.1", "--no-timing", "--seed", "3"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["status"] == OPTIMAL and out["wall_time"] is None and out["seed"] == 3
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"problem": "salvage-d5", "delta_grid": [0.1], "repetitions": 2}))
    assert main(["bench-quality", "--config", str(cfg), "--out", str(tmp_path / "q"), "--no-timing"]) == 0
    paths = json.loads(capsys.readouterr().out)
    assert len(open(paths["csv"]).read().splitlines()) == 5
    assert main(["bench-efficiency", "--config", str(cfg), "--out", str(tmp_path / "e")]) == 0
    capsys.readouterr()
    with pytest.raises(SystemExit):
        main(["solve"])
