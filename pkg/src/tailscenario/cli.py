"""Command-line entry point: ``tailscenario {solve,bench-efficiency,bench-quality,verify-sets}``."""

from __future__ import annotations

import argparse
import json
import sys

from .bench import ExperimentConfig, emit_outputs, run_efficiency_bench, run_quality_bench, verify_sets
from .problems import PRESET_NAMES
from .scenario import CC_SC, EFF_SC, ScenarioProblem, solve_cc_sc, solve_eff_sc


def _config(args) -> ExperimentConfig:
    if args.config:
        cfg = ExperimentConfig.load(args.config).to_dict()
    else:
        cfg = {"problem": args.preset}
    if getattr(args, "preset", None) and args.config is None:
        cfg["problem"] = args.preset
    if args.seed is not None:
        cfg["seed"] = args.seed
    if cfg.get("problem") is None:
        raise SystemExit("need --config or --preset")
    return ExperimentConfig.from_dict(cfg)


def _add_common(p, need_out: bool):
    p.add_argument("--config", help="JSON file with ExperimentConfig fields")
    p.add_argument("--preset", choices=PRESET_NAMES, help="problem preset when no config is given")
    p.add_argument("--seed", type=int, help="overrides the config seed")
    p.add_argument("--no-timing", action="store_true", help="blank wall times so outputs are byte-reproducible")
    if need_out:
        p.add_argument("--out", required=True, help="output directory")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="tailscenario", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="one run, SolveReport JSON on stdout")
    _add_common(p, need_out=False)
    p.add_argument("--method", choices=(EFF_SC, CC_SC), default=EFF_SC)
    p.add_argument("--delta", type=float, help="risk level (default: first grid value of the config)")
    p.add_argument("--diagnostics", action="store_true", help="include solver diagnostics")

    p = sub.add_parser("bench-efficiency", help="sample counts and wall times over the delta grid")
    _add_common(p, need_out=True)
    p = sub.add_parser("bench-quality", help="repeated runs, value and violation distributions")
    _add_common(p, need_out=True)

    p = sub.add_parser("verify-sets", help="statistical containment/covering/budget checks for (O, C)")
    _add_common(p, need_out=False)
    p.add_argument("--n", type=int, default=1000, help="random decisions per check")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    cfg = _config(args)
    timing = not args.no_timing

    if args.command == "solve":
        problem = ScenarioProblem.from_preset(cfg.problem)
        delta = args.delta if args.delta is not None else cfg.delta_grid[0]
        if args.method == EFF_SC:
            rep = solve_eff_sc(problem, delta, cfg.beta, cfg.seed, delta_prime_rule=cfg.delta_prime_rule)
        else:
            rep = solve_cc_sc(problem, delta, cfg.beta, cfg.seed, row_cap=cfg.row_cap)
        out = rep.to_dict(args.diagnostics)
        if not timing:
            out["wall_time"] = None
            out.get("diagnostics", {}).pop("solve_time", None)
            out.get("diagnostics", {}).pop("sample_time", None)
        json.dump(out, sys.stdout)
        sys.stdout.write("\n")
        return 0

    if args.command in ("bench-efficiency", "bench-quality"):
        runner = run_efficiency_bench if args.command == "bench-efficiency" else run_quality_bench
        records = runner(cfg)
        paths = emit_outputs(records, args.out, timing=timing)
        json.dump(paths, sys.stdout)
        sys.stdout.write("\n")
        return 0

    problem = ScenarioProblem.from_preset(cfg.problem)
    results = [verify_sets(problem, d, args.n, cfg.seed, cfg.beta) for d in cfg.delta_grid]
    json.dump(results, sys.stdout, indent=2)
    sys.stdout.write("\n")
    return 0 if all(r["ok"] for r in results) else 1


if __name__ == "__main__":
    sys.exit(main())
