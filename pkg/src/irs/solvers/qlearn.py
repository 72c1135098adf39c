from __future__ import annotations

from typing import Callable, Optional

import numpy as np

from irs.env import state_index
from irs.solvers.common import Hyperparams, TabularQ, epsilon

# A zero table is optimistic, but one unlucky early outcome can still make a
# near-greedy learner abandon the optimal action for good; the DQN's 0.01
# schedule is too timid here, so tabular runs default to wider exploration.
TABULAR_DEFAULTS = Hyperparams(epochs=5000, epsilon_start=0.1, epsilon_zero_epoch=4000)


def q_learn_tabular(env, h: Hyperparams = TABULAR_DEFAULTS, alpha: Optional[float] = None, seed: int = 0,
                    episodes: Optional[int] = None,
                    on_episode: Optional[Callable[[int, int, float, TabularQ], bool]] = None) -> TabularQ:
    """One-step Q-learning with a zero-initialised table.

    ``alpha=None`` uses the visit-count step size ``1 / n(s, a)``; a float
    gives a constant step. Episodes start from the environment's initial
    state and end on a secure state or after ``h.max_step`` steps. Truncated
    episodes still bootstrap from the next state; only secure states cut the
    target.

    ``on_episode(epoch, env_steps, episode_return, q)`` runs after every
    episode; returning True stops training.
    """
    episodes = h.epochs if episodes is None else episodes
    env.state_space()  # enforces the enumeration cap
    q = TabularQ(env.n_bits, env.n_actions)
    visits = np.zeros_like(q.table)
    rng = np.random.default_rng(seed)
    env.reseed(seed)
    env.max_step = h.max_step
    table = q.table
    steps = 0
    for epoch in range(episodes):
        eps = epsilon(epoch, h)
        s = env.reset()
        i = state_index(s)
        total = 0.0
        while not env.done:
            if rng.random() < eps:
                a = int(rng.integers(env.n_actions))
            else:
                a = int(np.argmax(table[i]))
            s2, r, _ = env.step(a)
            j = state_index(s2)
            target = r if env.is_terminal(s2) else r + h.gamma * table[j].max()
            visits[i, a] += 1
            step = alpha if alpha is not None else 1.0 / visits[i, a]
            table[i, a] += step * (target - table[i, a])
            i = j
            steps += 1
            total += r
        if on_episode is not None and on_episode(epoch, steps, total, q):
            break
    return q
