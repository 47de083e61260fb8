"""Command-line entry point: graph generation, experiment runs, and the
release verification suite."""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import acceptance
from .graph import (
    make_comb,
    make_full_binary_tree,
    make_hypercube,
    make_random_tree,
    make_waterfall,
    save_graph,
)
from .harness import EXPERIMENTS, ExperimentConfig, emit, run_experiment

_FAMILIES = ("comb", "waterfall", "binary", "hypercube", "random")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ssmclab",
        description="Substochastic Monte Carlo simulation laboratory",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen-graph", help="write a benchmark graph as JSON")
    gen.add_argument("family", choices=_FAMILIES)
    gen.add_argument("--depth", "-D", type=int, default=8)
    gen.add_argument("--seed", type=int, default=0, help="random-tree seed")
    gen.add_argument("--weight", type=float, default=1.0, help="binary-tree edge weight")
    gen.add_argument("--out", required=True)

    run = sub.add_parser("run", help="run an experiment from a JSON config")
    run.add_argument("config", help="path to the experiment config file")
    run.add_argument("--seed", type=int, default=None)
    run.add_argument("--trials", type=int, default=None)
    run.add_argument("--out", default=None)
    run.add_argument("--format", choices=("csv", "json"), default=None)

    sub.add_parser("verify", help="run the full release check suite")
    return parser


def _cmd_gen_graph(args) -> int:
    if args.family == "comb":
        g = make_comb(args.depth)
    elif args.family == "waterfall":
        g = make_waterfall(args.depth)
    elif args.family == "binary":
        g = make_full_binary_tree(args.depth, weight=args.weight)
    elif args.family == "hypercube":
        g = make_hypercube(args.depth)
    else:
        g = make_random_tree(args.depth, np.random.default_rng(args.seed))
    save_graph(g, args.out)
    print(f"wrote {args.family} graph ({g.n} vertices) to {args.out}")
    return 0


def _cmd_run(args) -> int:
    cfg = ExperimentConfig.from_file(
        args.config,
        seed=args.seed,
        trials=args.trials,
        out=args.out,
        format=args.format,
    )
    records, summary = run_experiment(cfg)
    if cfg.out:
        emit(records, cfg.format, cfg.out, summary=summary)
    print(json.dumps(summary, indent=1, sort_keys=True))
    return 0 if summary["passed"] else 1


def _cmd_verify(_args) -> int:
    results = acceptance.run_all(report=print)
    failed = [r for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed")
    return 1 if failed else 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "gen-graph":
        return _cmd_gen_graph(args)
    if args.command == "run":
        return _cmd_run(args)
    return _cmd_verify(args)


if __name__ == "__main__":
    sys.exit(main())
