"""Experiment harness: efficiency and quality benchmarks, set verification, output files."""

from __future__ import annotations

import csv
import math
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .problems import clearing_deficit
from .sampler import sample_conditional_union_exact, wilson_interval
from .scenario import (CC_SC, DEFAULT_ROW_CAP, EFF_SC, OPTIMAL, ScenarioProblem, SolveReport, eff_sc_sets,
                       solve_cc_sc, solve_eff_sc)
from .tailmodel import child_seeds, make_rng

DEFAULT_DELTA_GRID = (0.001, 0.002, 0.005, 0.01, 0.02, 0.05, 0.1)
CSV_HEADER = ("method", "delta", "d", "n_scenarios", "status", "value", "violation_prob", "wall_time_s", "seed")
QUANTILE_KEYS = ("q5", "q25", "q50", "q75", "q95")


@dataclass(frozen=True)
class ExperimentConfig:
    problem: str
    delta_grid: tuple = DEFAULT_DELTA_GRID
    beta: float = 1e-5
    repetitions: int = 100
    mc_eval_n: int = 10**6
    methods: tuple = (EFF_SC, CC_SC)
    seed: int = 0
    row_cap: int = DEFAULT_ROW_CAP
    n_workers: int = 1
    delta_prime_rule: str = "exact"

    def __post_init__(self):
        object.__setattr__(self, "delta_grid", tuple(float(d) for d in self.delta_grid))
        object.__setattr__(self, "methods", tuple(self.methods))
        if not self.delta_grid or any(not 0 < d < 1 for d in self.delta_grid):
            raise ValueError("delta_grid values must lie in (0, 1)")
        if not 0 < self.beta < 1:
            raise ValueError("beta must lie in (0, 1)")
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")
        bad = set(self.methods) - {EFF_SC, CC_SC}
        if bad or not self.methods:
            raise ValueError(f"methods must be a non-empty subset of {EFF_SC}, {CC_SC}")
        if self.delta_prime_rule not in ("exact", "floor"):
            raise ValueError("delta_prime_rule must be 'exact' or 'floor'")
        if self.n_workers < 1:
            raise ValueError("n_workers must be >= 1")

    @classmethod
    def from_dict(cls, obj: dict) -> "ExperimentConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(obj) - known
        if unknown:
            raise ValueError(f"unknown config fields {sorted(unknown)}")
        return cls(**obj)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        out = asdict(self)
        out["delta_grid"] = list(self.delta_grid)
        out["methods"] = list(self.methods)
        return out


@dataclass
class ExperimentRecord:
    report: SolveReport
    d: int
    problem: str
    violation_prob: float | None = None
    extra: dict = field(default_factory=dict)

    def sort_key(self):
        return (self.report.method, self.report.delta, self.report.seed)

    def csv_row(self, timing: bool = True) -> list[str]:
        r = self.report
        return [
            r.method,
            repr(r.delta),
            str(self.d),
            str(r.n_scenarios),
            r.status,
            repr(float(r.value)) if np.isfinite(r.value) else "",
            "" if self.violation_prob is None else repr(float(self.violation_prob)),
            f"{r.wall_time:.6f}" if timing else "",
            str(r.seed),
        ]


def _run_one(args) -> ExperimentRecord:
    cfg, method, delta, seed, evaluate = args
    problem = ScenarioProblem.from_preset(cfg.problem)
    if method == EFF_SC:
        rep = solve_eff_sc(problem, delta, cfg.beta, seed, delta_prime_rule=cfg.delta_prime_rule)
    else:
        rep = solve_cc_sc(problem, delta, cfg.beta, seed, row_cap=cfg.row_cap)
    viol = None
    if evaluate and rep.status == OPTIMAL:
        eval_seed = (seed + 1) % 2**63
        viol = problem.violation_probability(rep.x_opt, cfg.mc_eval_n, eval_seed).value
    return ExperimentRecord(rep, problem.d, cfg.problem, viol)


def _run_all(cfg: ExperimentConfig, jobs: list) -> list[ExperimentRecord]:
    if cfg.n_workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.n_workers) as ex:
            records = list(ex.map(_run_one, jobs))
    else:
        records = [_run_one(j) for j in jobs]
    return sorted(records, key=ExperimentRecord.sort_key)


def run_efficiency_bench(cfg: ExperimentConfig, evaluate: bool = True) -> list[ExperimentRecord]:
    """One run per (delta, method) with a shared seed; the repetitions field is ignored."""
    seed = child_seeds(cfg.seed, 1)[0]
    jobs = [(cfg, m, d, seed, evaluate) for m in cfg.methods for d in cfg.delta_grid]
    return _run_all(cfg, jobs)


def run_quality_bench(cfg: ExperimentConfig) -> list[ExperimentRecord]:
    """R seeded runs per (delta, method); both methods see the same R seeds."""
    seeds = child_seeds(cfg.seed, cfg.repetitions)
    jobs = [(cfg, m, d, s, True) for m in cfg.methods for d in cfg.delta_grid for s in seeds]
    return _run_all(cfg, jobs)


def _quantiles(values) -> dict | None:
    v = np.asarray([x for x in values if x is not None and np.isfinite(x)], dtype=float)
    if not v.size:
        return None
    return dict(zip(QUANTILE_KEYS, (float(q) for q in np.percentile(v, [5, 25, 50, 75, 95]))))


def summarize(records: list[ExperimentRecord], timing: bool = True) -> dict:
    cells = {}
    for rec in records:
        cells.setdefault((rec.report.method, rec.report.delta), []).append(rec)
    out_cells = []
    for (method, delta), recs in sorted(cells.items()):
        opt = [r for r in recs if r.report.status == OPTIMAL]
        cell = {
            "method": method,
            "delta": delta,
            "runs": len(recs),
            "optimal": len(opt),
            "statuses": sorted({r.report.status for r in recs}),
            "n_scenarios": _quantiles([r.report.n_scenarios for r in recs]),
            "value": _quantiles([r.report.value for r in opt]),
            "violation_prob": _quantiles([r.violation_prob for r in opt]),
        }
        if opt and any(r.violation_prob is not None for r in opt):
            cell["violation_over_delta"] = sum(r.violation_prob > delta for r in opt if r.violation_prob is not None)
        if timing:
            cell["wall_time_s"] = _quantiles([r.report.wall_time for r in recs])
        out_cells.append(cell)

    ratio = {}
    for delta in sorted({d for _, d in cells}):
        eff, cc = cells.get((EFF_SC, delta)), cells.get((CC_SC, delta))
        if not eff or not cc:
            continue
        ev = [r.report.value for r in eff if r.report.status == OPTIMAL]
        cv = [r.report.value for r in cc if r.report.status == OPTIMAL]
        if ev and cv and np.median(cv) != 0:
            ratio[repr(delta)] = float(np.median(ev) / np.median(cv))
    problem = records[0].problem if records else None
    return {"problem": problem, "cells": out_cells, "median_value_ratio_eff_over_cc": ratio}


def emit_outputs(records: list[ExperimentRecord], out_dir, timing: bool = True) -> dict:
    """Write records.csv, summary.json and boxplots.svg; return their paths."""
    if not records:
        raise ValueError("no records to write")
    from .svgplot import render_boxplots

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    records = sorted(records, key=ExperimentRecord.sort_key)
    paths = {"csv": out / "records.csv", "summary": out / "summary.json", "svg": out / "boxplots.svg"}

    with open(paths["csv"], "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for rec in records:
            w.writerow(rec.csv_row(timing))

    with open(paths["summary"], "w") as fh:
        json.dump(summarize(records, timing), fh, indent=2, sort_keys=True)
        fh.write("\n")

    methods = sorted({r.report.method for r in records}, key=lambda m: (m != EFF_SC, m))
    deltas = sorted({r.report.delta for r in records})

    def groups(getter, only_optimal=True):
        g = []
        for m in methods:
            for d in deltas:
                vals = [getter(r) for r in records if r.report.method == m and r.report.delta == d
                        and (r.report.status == OPTIMAL or not only_optimal)]
                vals = np.array([v for v in vals if v is not None and np.isfinite(v)], dtype=float)
                g.append((m, d, vals))
        return g

    panels = [
        ("optimal value", groups(lambda r: r.report.value)),
        ("violation probability", groups(lambda r: r.violation_prob)),
        ("number of scenarios", groups(lambda r: float(r.report.n_scenarios), only_optimal=False)),
    ]
    if timing:
        panels.append(("wall time (s)", groups(lambda r: r.report.wall_time, only_optimal=False)))
    paths["svg"].write_text(render_boxplots(panels, methods, deltas))
    return {k: str(v) for k, v in paths.items()}


# ------------------------------------------------------------ set verification


def verify_sets(problem: ScenarioProblem, delta: float, n: int = 1000, seed: int = 0,
                beta: float = 1e-5, mc_n: int = 200_000) -> dict:
    """Statistical checks of containment, covering and budget for the constructed (O, C).

    Containment: random decisions with violation probability at most delta must
    lie in O. Covering: for random decisions in O, draws that violate the
    constraint must lie in C. Budget: P(L in C)/delta.
    """
    rng = make_rng(seed)
    outer, event, p, _ = eff_sc_sets(problem, delta, beta, seed)
    d = problem.d
    res = {"problem": problem.name or problem.kind, "delta": delta, "p_event": p.to_json()}

    if problem.kind == "salvage":
        net, model = problem.params, problem.model
        q = model.tail_quantiles(delta)
        base = q - net.m
        # decisions through their thresholds tau = (I-Q^T)^{-1} x + m: a total exceedance
        # budget in [delta/4, 4 delta] split at random over coordinates, so about half are feasible
        budget = delta * np.exp(rng.uniform(math.log(0.25), math.log(4.0), size=(n, 1)))
        share = rng.dirichlet(np.full(d, 0.5), size=n) * np.minimum(budget, 0.999)
        tau = model.scales * np.maximum(share, 1e-300) ** (-1.0 / model.indices)
        X = (tau - net.m) @ np.asarray(net.settlement_matrix).T
        viol = np.array([problem.violation_probability(x).value for x in X])
        feasible = viol <= delta
        in_o = outer.contains(X, tol=1e-9)
        res["containment"] = {"tested": int(feasible.sum()), "counterexamples": int(np.sum(feasible & ~in_o))}

        t_in = base + np.abs(base) * rng.uniform(0.0, 2.0, size=(n, d))
        X_in = t_in @ np.asarray(net.settlement_matrix).T
        misses = draws = 0
        for k, x in enumerate(X_in):
            tau = net.payments(x) + net.m
            L = sample_conditional_union_exact(model, tau, 1000, seed=int(rng.integers(2**62))).samples
            L = L[clearing_deficit(net, x, L) > 0]
            draws += L.shape[0]
            misses += int(np.sum(~event.contains(L)))
        res["covering"] = {"decisions": n, "draws": draws, "misses": misses}
        ratio = (1 - (1 - delta) ** d) / delta
        res["budget"] = {"ratio": ratio, "bound": d, "ok": bool(ratio <= d)}
    else:
        eta = problem.params.eta
        block = problem.model.sample(mc_n, int(rng.integers(2**62)))
        hi_y = 1.0 / outer.bounds  # y <= eta/UB inside O
        Y = hi_y * rng.uniform(0.2, 3.0, size=(n, d))
        hits = (block @ Y.T > eta).sum(axis=0)
        upper = np.array([wilson_interval(int(h), mc_n, 0.99)[1] for h in hits])
        feasible = upper <= delta
        in_o = np.all(Y <= hi_y * (1 + 1e-9), axis=1)
        res["containment"] = {"tested": int(feasible.sum()), "counterexamples": int(np.sum(feasible & ~in_o))}

        Y_in = hi_y * rng.uniform(0.05, 1.0, size=(n, d))
        misses = draws = 0
        for y in Y_in:
            L = block[block @ y > eta]
            draws += L.shape[0]
            misses += int(np.sum(~event.contains(L)))
        res["covering"] = {"decisions": n, "draws": draws, "misses": misses}
        hi = p.ci_high
        res["budget"] = {"ratio": p.value / delta, "ratio_ci_high": hi / delta, "bound": 5.0, "ok": bool(hi / delta <= 5.0)}

    res["ok"] = bool(res["containment"]["counterexamples"] == 0 and res["covering"]["misses"] == 0 and res["budget"]["ok"])
    return res
