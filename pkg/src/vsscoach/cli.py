"""Command line entry point: train, eval and report verbs.

Exit codes: 0 success, 1 usage error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import sys

from .harness import (
    OPPONENT_NAMES,
    load_config,
    run_evaluation,
    run_training,
    write_reports,
)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="vsscoach",
                     description="Train and evaluate a role-assignment coach "
                                 "for 3v3 robot soccer.")
    sub = parser.add_subparsers(dest="verb", required=True)

    train = sub.add_parser("train", help="run a seeded training loop",
                           parents=[], add_help=True)
    train.add_argument("--algo", choices=("ddqn", "ddpg"), default=None)
    train.add_argument("--seed", type=int, default=None)
    train.add_argument("--episodes", type=int, default=None)
    train.add_argument("--episode-seconds", type=float, default=None)
    train.add_argument("--config", default=None, help="YAML config file")
    train.add_argument("--out", default=None, help="output directory")

    ev = sub.add_parser("eval", help="evaluate a frozen checkpoint")
    ev.add_argument("--checkpoint", required=True)
    ev.add_argument("--algo", choices=("ddqn", "ddpg"), required=True)
    ev.add_argument("--opponent", choices=tuple(OPPONENT_NAMES), default="balanced")
    ev.add_argument("--matches", type=int, default=30)
    ev.add_argument("--seed", type=int, default=0)
    ev.add_argument("--episode-seconds", type=float, default=None)
    ev.add_argument("--config", default=None)

    rep = sub.add_parser("report", help="emit report files for a run directory")
    rep.add_argument("--runs", required=True, help="directory holding episodes.csv")
    rep.add_argument("--window", type=int, default=15)
    return parser


def _cmd_train(args) -> int:
    config = load_config(args.config, algorithm=args.algo, seed=args.seed,
                         episodes=args.episodes,
                         episode_seconds=args.episode_seconds,
                         out_dir=args.out)
    result = run_training(config)
    print(f"final checkpoint: {result['checkpoint']}")
    print(f"episode log: {result['log']}")
    return 0


def _cmd_eval(args) -> int:
    config = load_config(args.config, seed=args.seed,
                         episode_seconds=args.episode_seconds)
    table, _ = run_evaluation(args.checkpoint, args.algo,
                              OPPONENT_NAMES[args.opponent], args.matches,
                              args.seed, config.env_config())
    print(f"{args.algo} vs {table.opponent} over {table.matches} matches: "
          f"{table.mean_ours:.2f} ({table.std_ours:.2f}) x "
          f"{table.mean_theirs:.2f} ({table.std_theirs:.2f})  "
          f"W/D/L {table.wins}/{table.draws}/{table.losses}")
    return 0


def _cmd_report(args) -> int:
    for path in write_reports(args.runs, window=args.window):
        print(f"wrote {path}")
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {"train": _cmd_train, "eval": _cmd_eval, "report": _cmd_report}
    try:
        return handlers[args.verb](args)
    except (ValueError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
