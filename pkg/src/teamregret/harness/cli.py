"""Command-line front end.

Exit codes: 0 success, 1 usage error, 2 runtime failure, 3 consistency
violation.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="teamregret",
                     description="Team regret minimization toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    train = sub.add_parser("train", help="train a method per a config file")
    train.add_argument("--config", required=True)
    train.add_argument("--out", required=True)
    train.add_argument("--seed", required=True, type=int)
    train.add_argument("--iterations", type=int, default=None)
    train.add_argument("--single-thread", action="store_true",
                       help="strict reproducible mode (byte-identical outputs)")
    train.add_argument("--resume", default=None,
                       help="checkpoint to resume from (optional)")

    ev = sub.add_parser("eval", help="evaluate a checkpoint")
    ev.add_argument("--checkpoint", required=True)
    ev.add_argument("--episodes", required=True, type=int)
    ev.add_argument("--opponent", default="self",
                    help="self, scripted, or a checkpoint path (battle only)")
    ev.add_argument("--seed", type=int, default=0)

    plot = sub.add_parser("plot", help="render learning curves to SVG")
    plot.add_argument("--column", required=True, choices=("mean_return", "win_rate"))
    plot.add_argument("--out", required=True)
    plot.add_argument("--window", type=int, default=1)
    plot.add_argument("csvs", nargs="+", metavar="csv")

    check = sub.add_parser("check", help="verification commands")
    check_sub = check.add_subparsers(dest="check_command", required=True)
    cons = check_sub.add_parser("consistency",
                                help="joint-vs-individual argmax consistency")
    cons.add_argument("--agents", required=True, type=int)
    cons.add_argument("--actions", required=True, type=int)
    cons.add_argument("--trials", required=True, type=int)
    cons.add_argument("--seed", required=True, type=int)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)

    try:
        if args.command == "train":
            from .config import load_config
            from .run import run_train

            config = load_config(args.config, seed=args.seed,
                                 iterations=args.iterations)
            report = run_train(config, args.out, single_thread=args.single_thread,
                               resume=args.resume)
            print(json.dumps(report["final_eval"], sort_keys=True))
            return 0

        if args.command == "eval":
            from .run import run_eval

            report = run_eval(args.checkpoint, args.episodes,
                              opponent=args.opponent, seed=args.seed)
            print(json.dumps({
                "episodes": report.episodes,
                "mean_return": report.mean_return,
                "win_rate": report.win_rate,
                "returns": report.returns,
            }, sort_keys=True))
            return 0

        if args.command == "plot":
            from .plotting import emit_plots

            out = emit_plots(args.csvs, args.out, column=args.column,
                             window=args.window)
            print(f"wrote {out}")
            return 0

        if args.command == "check" and args.check_command == "consistency":
            from ..regret import consistency_check

            report = consistency_check(args.agents, args.actions, args.trials,
                                       np.random.default_rng(args.seed))
            print(report)
            return 3 if report.violations else 0

        parser.error(f"unknown command {args.command!r}")
        return 1
    except SystemExit:
        raise
    except Exception as e:  # runtime failure -> exit 2, per the CLI contract
        print(f"teamregret: error: {e}", file=sys.stderr)
        return 2


def entry() -> None:
    raise SystemExit(main())


if __name__ == "__main__":
    raise SystemExit(main())
