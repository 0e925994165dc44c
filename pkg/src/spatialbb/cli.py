"""Command-line entry point: solve, compare and gen subcommands.

Exit codes for ``solve``: 0 when the run closed the gap (Optimal/GapReached),
2 when a node/time/numerical limit stopped it, 3 on infeasibility, 1 on bad
input.
"""

from __future__ import annotations

import argparse
import os
import sys
from typing import List, Optional

from . import bench
from .engine import RULES, SolverConfig, solve
from .instance import InstanceError, load_instance, save_instance


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--rule", choices=RULES, default="esb", help="branching rule")
    p.add_argument("--gap-tol", type=float, default=0.001,
                   help="relative gap tolerance (0.001 = 0.1%%)")
    p.add_argument("--time-limit", type=float, default=3600.0, help="wall-clock limit, seconds")
    p.add_argument("--node-cap", type=int, default=100_000, help="max processed nodes")
    p.add_argument("--iter-max", type=int, default=4,
                   help="binary-search probes per side and variable")
    p.add_argument("--epsilon", type=float, default=1e-6,
                   help="stability floor in the branching score")
    p.add_argument("--lambda", dest="basic_lambda", type=float, default=0.25,
                   help="midpoint weight of the basic rule's branching point")
    p.add_argument("--ub-frequency", type=int, default=10,
                   help="run the incumbent heuristic every N processed nodes")
    p.add_argument("--feas-tol", type=float, default=1e-6, help="incumbent feasibility tolerance")
    p.add_argument("--root-budget", type=float, default=5.0,
                   help="seconds of multi-start incumbent search at the root")
    p.add_argument("--seed", type=int, default=0, help="seed for the incumbent search starts")
    p.add_argument("--branch-all-vars", action="store_true",
                   help="consider every variable for branching, not only those in products")
    p.add_argument("--trace", action="store_true",
                   help="include the per-node trace and tightening log in the report")
    p.add_argument("--no-timing", action="store_true",
                   help="write time_s as null for byte-reproducible reports")


def _config_from_args(args: argparse.Namespace) -> SolverConfig:
    return SolverConfig(
        rule=args.rule,
        gap_tol=args.gap_tol,
        time_limit=args.time_limit,
        node_cap=args.node_cap,
        iter_max=args.iter_max,
        epsilon=args.epsilon,
        basic_lambda=args.basic_lambda,
        ub_frequency=args.ub_frequency,
        seed=args.seed,
        trace=args.trace,
        feas_tol=args.feas_tol,
        root_budget=args.root_budget,
        branch_all_vars=args.branch_all_vars,
        report_timing=not args.no_timing,
    )


def cmd_solve(args: argparse.Namespace) -> int:
    try:
        inst = load_instance(args.instance)
    except OSError as exc:
        print(f"error: cannot read {args.instance}: {exc}", file=sys.stderr)
        return 1
    except InstanceError as exc:
        print(f"error: {args.instance}: {exc}", file=sys.stderr)
        return 1
    try:
        config = _config_from_args(args)
        config.validate()
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    report = solve(inst, config)
    text = report.to_json()
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return report.exit_code()


def cmd_compare(args: argparse.Namespace) -> int:
    rules = [r.strip() for r in args.rules.split(",") if r.strip()]
    for r in rules:
        if r not in RULES:
            print(f"error: unknown rule {r!r}", file=sys.stderr)
            return 1
    if not rules:
        print("error: no rules given", file=sys.stderr)
        return 1
    try:
        names = sorted(f for f in os.listdir(args.directory) if f.endswith(".json"))
    except OSError as exc:
        print(f"error: cannot list {args.directory}: {exc}", file=sys.stderr)
        return 1
    instances = []
    for fname in names:
        try:
            instances.append(load_instance(os.path.join(args.directory, fname)))
        except (OSError, InstanceError) as exc:
            print(f"error: {fname}: {exc}", file=sys.stderr)
            return 1
    try:
        config = _config_from_args(args)
        config.validate()
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    tables = bench.compare_to_csv(instances, rules, config)
    os.makedirs(args.out_dir, exist_ok=True)
    for fname, text in tables.items():
        with open(os.path.join(args.out_dir, fname), "w", encoding="utf-8") as fh:
            fh.write(text)
    print(f"wrote {', '.join(sorted(tables))} to {args.out_dir}")
    return 0


def cmd_gen(args: argparse.Namespace) -> int:
    try:
        if args.kind == "bbp":
            inst = bench.gen_bbp(args.n_left, args.n_right, args.density, args.seed)
        else:
            inst = bench.gen_pooling_toy(args.pool_kind, args.seed)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    out = args.out or f"{inst.name}.json"
    save_instance(inst, out)
    print(out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spatialbb",
        description="Spatial branch-and-bound solver for box-constrained QCQPs",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_solve = sub.add_parser("solve", help="solve one instance and print a JSON report")
    p_solve.add_argument("instance", help="path to a JSON instance file")
    p_solve.add_argument("--out", help="write the report here instead of stdout")
    _add_config_flags(p_solve)
    p_solve.set_defaults(func=cmd_solve)

    p_cmp = sub.add_parser("compare", help="run several rules over a directory of instances")
    p_cmp.add_argument("directory", help="directory of *.json instance files")
    p_cmp.add_argument("--rules", default="esb,basic,balance",
                       help="comma-separated rules to compare")
    p_cmp.add_argument("--out-dir", default="compare_out", help="where to write the CSV tables")
    _add_config_flags(p_cmp)
    p_cmp.set_defaults(func=cmd_compare)

    p_gen = sub.add_parser("gen", help="generate a random instance file")
    gen_sub = p_gen.add_subparsers(dest="kind", required=True)

    p_bbp = gen_sub.add_parser("bbp", help="bilinear bipartite instance")
    p_bbp.add_argument("n_left", type=int)
    p_bbp.add_argument("n_right", type=int)
    p_bbp.add_argument("density", type=float)
    p_bbp.add_argument("--seed", type=int, default=0)
    p_bbp.add_argument("--out", help="output path (defaults to <name>.json)")
    p_bbp.set_defaults(func=cmd_gen)

    p_pool = gen_sub.add_parser("pooling", help="single-pool blending toy")
    p_pool.add_argument("--kind", dest="pool_kind", default="haverly-like",
                        choices=("haverly-like", "degenerate"))
    p_pool.add_argument("--seed", type=int, default=0)
    p_pool.add_argument("--out", help="output path (defaults to <name>.json)")
    p_pool.set_defaults(func=cmd_gen)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
