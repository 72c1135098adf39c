from irs.solvers.common import (
    EvalResult,
    Hyperparams,
    NetQ,
    ReplayBuffer,
    TabularQ,
    Transition,
    epsilon,
    evaluate_policy,
    policy_value,
)
from irs.solvers.dqn import dqn_train, greedy_score, mlp_spec_for
from irs.solvers.qlearn import TABULAR_DEFAULTS, q_learn_tabular
from irs.solvers.transfer import save_checkpoint, warm_start
from irs.solvers.vi import ViResult, build_tables, value_iteration

__all__ = [
    "TABULAR_DEFAULTS",
    "EvalResult",
    "Hyperparams",
    "NetQ",
    "ReplayBuffer",
    "TabularQ",
    "Transition",
    "ViResult",
    "build_tables",
    "dqn_train",
    "epsilon",
    "evaluate_policy",
    "greedy_score",
    "mlp_spec_for",
    "policy_value",
    "q_learn_tabular",
    "save_checkpoint",
    "value_iteration",
    "warm_start",
]
