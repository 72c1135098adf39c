"""Per-partition versus whole-system DQN training on the frontend+redis model.

Writes one CSV per (scope, seed) into --out-dir with wall-clock timing, then
prints steps and milliseconds to the 5% threshold for each scope.

    python scripts/partition_vs_system.py --seeds 0 1 2 3 4 --out-dir results/
"""

import argparse
import json
from dataclasses import replace
from pathlib import Path

from irs.config import ConfigPaths
from irs.harness import ExperimentConfig, compare, run_experiment
from irs.solvers import Hyperparams

ROOT = Path(__file__).resolve().parents[1]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config-dir", type=Path, default=ROOT / "configs" / "ob-frontend-redis")
    ap.add_argument("--partition", default="frontend-service")
    ap.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2, 3, 4])
    ap.add_argument("--epochs", type=int, default=2000)
    ap.add_argument("--out-dir", type=Path, default=Path("results"))
    args = ap.parse_args()

    base = ExperimentConfig(ConfigPaths.in_dir(args.config_dir), solver="dqn",
                            scope=f"partition:{args.partition}", hyper=Hyperparams(epochs=args.epochs))
    system = replace(base, scope="system")

    # full curves for plotting
    for cfg in (base, system):
        tag = cfg.scope.replace(":", "-")
        for seed in args.seeds:
            out = args.out_dir / f"{tag}-seed{seed}.csv"
            rep = run_experiment(replace(cfg, seed=seed, out=out))
            print(f"{tag} seed {seed}: final eval {rep.summary['final_eval_return']}, "
                  f"reference {rep.summary['reference_value']:.6f} -> {out}")

    # threshold timing, stopping each run as soon as it is within 5%
    res = compare(base, system, args.seeds)
    print(json.dumps(res.summary(), indent=2))


if __name__ == "__main__":
    main()
