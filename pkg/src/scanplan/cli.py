"""Command-line entry point.

    scanplan plan config.yaml [--set sampler.seed=3] [--strategy baseline]
    scanplan compare config.yaml
    scanplan heatmap config.yaml -o heat.ply
    scanplan validate-config config.yaml

Exit codes: 0 success, 2 config error, 3 coverage failure, 4 infeasible
tolerance, 5 unreachable viewpoint pair.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
from pathlib import Path

from . import report
from .config import Config
from .errors import PlanningError
from .pipeline import build_problem, run

log = logging.getLogger("scanplan")


def _config(args) -> Config:
    overrides = list(args.set or [])
    if getattr(args, "seed", None) is not None:
        overrides.append(f"seed={args.seed}")
    if getattr(args, "strategy", None):
        overrides.append(f"strategy={args.strategy}")
    if getattr(args, "output", None):
        overrides.append(f"output.dir={Path(args.output).resolve()}")
    return Config.load(args.config, overrides)


def cmd_plan(args) -> int:
    cfg = _config(args)
    problem = build_problem(cfg)
    result = run(problem, cfg["strategy"])
    out = cfg.output_dir
    report.write_lines(out / "plan.jsonl", report.plan_lines(result))
    report.write_lines(out / "metrics.jsonl", report.metrics_lines(result))
    if result.graph is not None:
        s = problem.sampler
        report.write_lines(out / "graph.jsonl", result.graph.to_lines(s.beta1, s.gamma1))
    report.write_heatmap(out / "heatmap.ply", result)
    m = report.metrics(result)
    print(f"{result.strategy}: m={m['m']} time={m['total_time']:.2f}s "
          f"r={100 * m['r']:.1f}% -> {out}")
    return 0


def cmd_compare(args) -> int:
    cfg = _config(args)
    problem = build_problem(cfg)
    results = [run(problem, s) for s in args.strategies]
    text = report.comparison_table(results)
    sys.stdout.write(text)
    if args.table:
        Path(args.table).write_text(text)
    return 0


def cmd_heatmap(args) -> int:
    cfg = _config(args)
    problem = build_problem(cfg)
    result = run(problem, cfg["strategy"])
    path = Path(args.out) if args.out else cfg.output_dir / "heatmap.ply"
    report.write_heatmap(path, result)
    print(path)
    return 0


def cmd_validate(args) -> int:
    cfg = _config(args)
    problem = build_problem(cfg)
    tight = min(problem.budgets.values(), key=lambda b: b.alpha_max)
    print(f"ok: {len(problem.mps)} MPs, {len(problem.mesh.triangles)} faces, "
          f"smallest angle budget {math.degrees(tight.alpha_max):.2f} deg")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="scanplan",
                                 description="Uncertainty-aware viewpoint and path planning "
                                             "for an optical scanner.")
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = ap.add_subparsers(dest="verb", required=True)

    def common(p):
        p.add_argument("config", help="YAML planner configuration")
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override a config key, e.g. sampler.max_iter=500 (repeatable)")
        p.add_argument("--seed", type=int, help="shorthand for --set seed=N")

    p = sub.add_parser("plan", help="plan viewpoints and a tour; write plan/metrics/heatmap")
    common(p)
    p.add_argument("--strategy", choices=("rrt", "baseline"))
    p.add_argument("-o", "--output", help="output directory (overrides output.dir)")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("compare", help="side-by-side table of several strategies")
    common(p)
    p.add_argument("--strategies", nargs="+", default=["rrt", "baseline"],
                   choices=("rrt", "baseline"))
    p.add_argument("--table", help="also write the table to this file")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("heatmap", help="plan and write only the coloured mesh")
    common(p)
    p.add_argument("--strategy", choices=("rrt", "baseline"))
    p.add_argument("--out", help="PLY path (default: <output.dir>/heatmap.ply)")
    p.set_defaults(func=cmd_heatmap)

    p = sub.add_parser("validate-config", help="load everything and derive budgets, then stop")
    common(p)
    p.set_defaults(func=cmd_validate)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except PlanningError as exc:
        print(f"scanplan: {exc.stage} error: {exc}", file=sys.stderr)
        uncovered = getattr(exc, "uncovered", ())
        if uncovered:
            print(f"scanplan: uncovered MPs: {', '.join(uncovered)}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
