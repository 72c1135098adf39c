"""``irs`` command-line entry point.

Subcommands::

    irs validate  --config-dir configs/ob
    irs vi        --config-dir configs/ob-frontend --scope partition:frontend-service --out vi.csv
    irs train     --config-dir configs/ob-frontend --scope partition:frontend-service --solver dqn --out run.csv
    irs compare   --config-dir configs/ob-frontend-redis --scope partition:frontend-service --seeds 0 1 2 3 4

Exit codes: 0 success, 2 configuration error, 3 runtime or budget failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import Optional, Sequence

from irs.config import ConfigError, ConfigPaths
from irs.env import EnvError, StateSpaceTooLarge
from irs.harness import (
    EXIT_CONFIG,
    EXIT_OK,
    EXIT_RUNTIME,
    BudgetError,
    ExperimentConfig,
    compare,
    run_experiment,
    run_vi,
    train_partitions,
    validate_configs,
)
from irs.solvers import TABULAR_DEFAULTS, Hyperparams

log = logging.getLogger("irs")


def _add_config_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("configuration files")
    g.add_argument("--config-dir", type=Path, help="directory holding the standard file names")
    g.add_argument("--topology", type=Path)
    g.add_argument("--actions", type=Path)
    g.add_argument("--termination", type=Path)
    g.add_argument("--weights", type=Path)
    g.add_argument("--init-state", type=Path)
    g.add_argument("--allow-unknown-types", action="store_true",
                   help="downgrade actions naming undeclared component types to warnings")


def _add_run_args(p: argparse.ArgumentParser, solver_default: str) -> None:
    p.add_argument("--scope", default="system", help="system or partition:<name>")
    p.add_argument("--solver", choices=("vi", "q", "dqn"), default=solver_default)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--gamma", type=float, default=0.99)
    p.add_argument("--epochs", type=int, help="default 2000 (dqn) or 5000 (q)")
    p.add_argument("--max-step", type=int, default=50)
    p.add_argument("--out", type=Path)
    g = p.add_argument_group("learning")
    g.add_argument("--epsilon-start", type=float, help="default 0.01 (dqn) or 0.1 (q)")
    g.add_argument("--epsilon-zero-epoch", type=int, help="default 1500 (dqn) or 4000 (q)")
    g.add_argument("--replay-capacity", type=int, default=5000)
    g.add_argument("--batch-size", type=int, default=128)
    g.add_argument("--target-sync", type=int, default=200, help="env steps between target-network copies")
    g.add_argument("--eval-every", type=int, default=25)
    g.add_argument("--eval-episodes", type=int, default=20)
    g.add_argument("--mc-eval", action="store_true",
                   help="score greedy policies by Monte Carlo rollouts even when exact evaluation is possible")
    g.add_argument("--hidden-size", type=int, default=32)
    g.add_argument("--layers", type=int, default=2)
    g.add_argument("--learning-rate", type=float, default=0.1)
    g.add_argument("--alpha", type=float, help="constant tabular step size (default 1/visits)")
    g.add_argument("--threshold", type=float, default=0.05, help="relative distance to the VI value")
    g.add_argument("--stop-at-threshold", action="store_true")
    g.add_argument("--clock", choices=("wall", "steps"), default="wall",
                   help="'steps' makes wall_clock_ms a deterministic step count")
    g.add_argument("--vi-tolerance", type=float, default=1e-10)


def _paths(args) -> ConfigPaths:
    base = ConfigPaths.in_dir(args.config_dir) if args.config_dir else None
    picked = {}
    for key in ("topology", "actions", "termination", "weights"):
        value = getattr(args, key) or (getattr(base, key) if base else None)
        if value is None:
            raise ConfigError(f"missing --{key} (or --config-dir)")
        picked[key] = value
    init = args.init_state or (base.init_state if base else None)
    return ConfigPaths(init_state=init, **picked)


def _pick(value, default):
    return default if value is None else value


def _config(args) -> ExperimentConfig:
    base = TABULAR_DEFAULTS if args.solver == "q" else Hyperparams()
    try:
        hyper = Hyperparams(
            gamma=args.gamma,
            epsilon_start=_pick(args.epsilon_start, base.epsilon_start),
            epsilon_zero_epoch=_pick(args.epsilon_zero_epoch, base.epsilon_zero_epoch),
            replay_capacity=args.replay_capacity,
            batch_size=args.batch_size,
            max_step=args.max_step,
            epochs=_pick(args.epochs, base.epochs),
            target_sync_interval=args.target_sync,
            eval_every=args.eval_every,
            eval_episodes=args.eval_episodes,
            exact_eval=not args.mc_eval,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return ExperimentConfig(
        paths=_paths(args),
        solver=args.solver,
        scope=args.scope,
        hyper=hyper,
        hidden_size=args.hidden_size,
        layers=args.layers,
        learning_rate=args.learning_rate,
        alpha=args.alpha,
        seed=args.seed,
        out=args.out,
        clock=args.clock,
        threshold=args.threshold,
        stop_at_threshold=args.stop_at_threshold,
        vi_tolerance=args.vi_tolerance,
        checkpoint=getattr(args, "checkpoint", None),
    )


def _print(obj) -> None:
    print(json.dumps(obj, indent=2, sort_keys=True, default=str))


# -- subcommands -------------------------------------------------------------


def cmd_validate(args) -> int:
    diags, code = validate_configs(_paths(args), args.allow_unknown_types)
    for d in diags:
        print(str(d), file=sys.stderr if d.severity == "error" else sys.stdout)
    errors = sum(d.severity == "error" for d in diags)
    print(f"{errors} error(s), {len(diags) - errors} warning(s)")
    return code


def cmd_vi(args) -> int:
    cfg = _config(args)
    env, result = run_vi(cfg)
    _print({
        "scope": cfg.scope,
        "states": len(result.states),
        "iterations": result.iterations,
        "residual": result.residual,
        "initial_value": result.value(env.initial_state),
        "initial_action": None if result.action(env.initial_state) is None
        else env.action_labels()[result.action(env.initial_state)],
        "diagnostics": list(result.diagnostics),
        "out": str(cfg.out) if cfg.out else None,
    })
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = _config(args)
    if cfg.solver == "vi":
        return cmd_vi(args)
    if args.each_partition:
        reports = train_partitions(cfg, args.workers)
        _print({name: rep.summary for name, rep in reports.items()})
    else:
        _print(run_experiment(cfg).summary)
    return EXIT_OK


def cmd_compare(args) -> int:
    cfg = _config(args)
    if cfg.scope == args.against:
        log.info("comparing %s with itself", cfg.scope)
    other = replace(cfg, scope=args.against)
    result = compare(cfg, other, list(args.seeds))
    _print(result.summary())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="irs", description="Partitioned intrusion-response planning")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="parse and check configuration files")
    _add_config_args(p)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("vi", help="solve a scope exactly and write the value/policy table")
    _add_config_args(p)
    _add_run_args(p, "vi")
    p.set_defaults(func=cmd_vi)

    p = sub.add_parser("train", help="train a tabular or deep Q agent and write a CSV report")
    _add_config_args(p)
    _add_run_args(p, "dqn")
    p.add_argument("--checkpoint", type=Path, help="save the trained network here (dqn only)")
    p.add_argument("--each-partition", action="store_true",
                   help="train one agent per partition in parallel (--out gets a per-partition suffix)")
    p.add_argument("--workers", type=int, help="parallel workers (default: number of partitions)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("compare", help="steps and wall-clock to threshold for two scopes")
    _add_config_args(p)
    _add_run_args(p, "dqn")
    p.add_argument("--against", default="system", help="second scope (default system)")
    p.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2, 3, 4])
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        for d in exc.diagnostics:
            print(f"  {d}", file=sys.stderr)
        return EXIT_CONFIG
    except (BudgetError, StateSpaceTooLarge, EnvError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
