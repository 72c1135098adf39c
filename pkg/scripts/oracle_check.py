"""Cross-check the solvers on every partition of a shipped configuration.

For each partition: VI value at the initial state, tabular Q's greedy value,
and one DQN run's steps to the 5% threshold.

    python scripts/oracle_check.py --config-dir configs/ob
"""

import argparse
from pathlib import Path

from irs.config import ConfigPaths, load_model
from irs.env import decompose
from irs.solvers import TABULAR_DEFAULTS, Hyperparams, dqn_train, policy_value, q_learn_tabular, value_iteration

ROOT = Path(__file__).resolve().parents[1]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config-dir", type=Path, default=ROOT / "configs" / "ob")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--skip-dqn", action="store_true")
    args = ap.parse_args()

    model, init = load_model(ConfigPaths.in_dir(args.config_dir))
    print(f"{'partition':<24}{'bits':>5}{'VI':>12}{'tabular':>12}{'dqn steps':>11}")
    for env in decompose(model, init):
        vi = value_iteration(env)
        ref = vi.value(env.initial_state)
        q = q_learn_tabular(env, TABULAR_DEFAULTS, seed=args.seed)
        tab = policy_value(env, q, 0.99)
        steps = "-"
        if not args.skip_dqn:
            _, rep = dqn_train(env, None, Hyperparams(), args.seed, reference=ref, stop_at_reference=True)
            steps = rep.summary["steps_to_threshold"] or "not reached"
        print(f"{env.name:<24}{env.n_bits:>5}{ref:>12.6f}{tab:>12.6f}{steps!s:>11}")
        for d in vi.diagnostics:
            print(f"  warning: {d}")


if __name__ == "__main__":
    main()
