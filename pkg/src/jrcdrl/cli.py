"""Command-line entry point.

    jrcdrl train-source   --config source --seed 0 --out runs/source
    jrcdrl collect-demos  --config source --weights runs/source/weights.json --out runs/demos
    jrcdrl train-target   --agent tlwd --config target --demos runs/demos/demos.json --out runs/tlwd
    jrcdrl sweep          --param p1v --values 0.1 0.5 0.9 --config target ... --out runs/sweep

``--config`` accepts a JSON file path or a built-in scenario name.
"""
from __future__ import annotations

import argparse
import os
import sys

from . import nn
from .config import load_scenario, with_train
from .errors import ConfigError, ContractViolation, JRCError
from .harness import (AGENT_KINDS, SWEEP_PARAMS, Scenario, SweepSpec, collect_demos, run_sweep,
                      train, write_long_format, write_sweep_csv)


def _common(p: argparse.ArgumentParser, default_config: str) -> None:
    p.add_argument("--config", default=default_config,
                   help="scenario JSON file or built-in name (default: %(default)s)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--episodes", type=int, help="override the configured episode budget")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="jrcdrl", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train-source", help="train a learner in the source environment")
    _common(p, "source")
    p.add_argument("--agent", choices=("ddqn", "qlearning"), default="ddqn")

    p = sub.add_parser("collect-demos", help="roll out source weights to record demonstrations")
    _common(p, "source")
    p.add_argument("--weights", required=True)
    p.add_argument("--count", type=int, help="number of transitions (default: train.demo_size)")

    p = sub.add_parser("train-target", help="train a learner in the target environment")
    _common(p, "target")
    p.add_argument("--agent", choices=AGENT_KINDS, required=True)
    p.add_argument("--weights", help="source weights (dpr)")
    p.add_argument("--demos", help="demonstration file (tlwd)")

    p = sub.add_parser("sweep", help="retrain agents across values of one parameter")
    _common(p, "target")
    p.add_argument("--param", choices=SWEEP_PARAMS, required=True)
    p.add_argument("--values", type=float, nargs="+", required=True)
    p.add_argument("--agents", nargs="+", choices=AGENT_KINDS, default=["tlwd", "dpr", "ddqn"])
    p.add_argument("--seeds", type=int, default=1, help="seeds seed, seed+1, ...")
    p.add_argument("--average-over", type=int, default=1000)
    p.add_argument("--weights", help="source weights (dpr)")
    p.add_argument("--demos", help="demonstration file (tlwd)")
    return parser


def _config(args):
    cfg = load_scenario(args.config)
    if args.episodes is not None:
        if args.episodes < 1:
            raise ConfigError("--episodes must be positive")
        cfg = with_train(cfg, episodes=args.episodes)
    return cfg


def _train(args, agent: str) -> None:
    cfg = _config(args)
    sc = Scenario(cfg, agent, args.seed, getattr(args, "weights", None),
                  getattr(args, "demos", None))
    result = train(sc, out_dir=args.out)
    write_long_format(result.history, os.path.join(args.out, "metrics_long.csv"))
    last = result.history[-1]
    print(f"{cfg.name}/{agent} seed={args.seed}: {len(result.history)} episodes, "
          f"final avg_reward={last.avg_reward:.3f} -> {args.out}")


def _collect(args) -> None:
    cfg = _config(args)
    if not os.path.exists(args.weights):
        raise ConfigError(f"weights not found: {args.weights}")
    params = nn.load(args.weights)
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, "demos.json")
    demos = collect_demos(params, cfg, args.seed, path, args.count)
    print(f"{len(demos)} demonstration transitions -> {path}")


def _sweep(args) -> None:
    cfg = _config(args)
    spec = SweepSpec(args.param, args.values, tuple(args.agents),
                     tuple(range(args.seed, args.seed + args.seeds)),
                     episodes=cfg.train.episodes, average_over=args.average_over)
    rows = run_sweep(spec, cfg, source_weights=args.weights, demo_path=args.demos)
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, "sweep.csv")
    write_sweep_csv(rows, path)
    print(f"{len(rows)} sweep rows -> {path}")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "train-source":
            _train(args, args.agent)
        elif args.command == "collect-demos":
            _collect(args)
        elif args.command == "train-target":
            _train(args, args.agent)
        else:
            _sweep(args)
    except JRCError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except ValueError as exc:
        print(f"contract violation: {exc}", file=sys.stderr)
        return ContractViolation.exit_code
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
