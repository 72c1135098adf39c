"""Pieces shared by the planners: hyperparameters, exploration schedule,
replay memory, Q-functions and policy evaluation."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Union

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from irs.env import state_index
from irs.nn import Mlp


@dataclass
class Hyperparams:
    gamma: float = 0.99
    epsilon_start: float = 0.01
    epsilon_zero_epoch: int = 1500
    replay_capacity: int = 5000
    batch_size: int = 128
    max_step: int = 50
    epochs: int = 2000
    target_sync_interval: int = 200
    eval_every: int = 25
    eval_episodes: int = 20
    # score the greedy policy exactly when the state space is enumerable
    exact_eval: bool = True

    def __post_init__(self):
        if not 0.0 < self.gamma < 1.0:
            raise ValueError(f"gamma must be in (0, 1), got {self.gamma}")
        for name in ("replay_capacity", "batch_size", "max_step", "target_sync_interval", "eval_every",
                     "eval_episodes", "epsilon_zero_epoch"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.batch_size > self.replay_capacity:
            raise ValueError("batch_size cannot exceed replay_capacity")


def epsilon(epoch: int, h: Hyperparams) -> float:
    """Exploration rate: ``epsilon_start`` at epoch 0, linear down to 0 at ``epsilon_zero_epoch``."""
    if epoch >= h.epsilon_zero_epoch:
        return 0.0
    return h.epsilon_start * (1.0 - epoch / h.epsilon_zero_epoch)


@dataclass(frozen=True)
class Transition:
    state: tuple
    action: int
    reward: float
    next_state: tuple
    done: bool


class ReplayBuffer:
    """Fixed-capacity ring buffer; the oldest transition is overwritten first."""

    def __init__(self, capacity: int, state_size: int):
        self.capacity = capacity
        self.states = np.zeros((capacity, state_size))
        self.actions = np.zeros(capacity, dtype=np.int64)
        self.rewards = np.zeros(capacity)
        self.next_states = np.zeros((capacity, state_size))
        self.dones = np.zeros(capacity)
        self.size = 0
        self.cursor = 0

    def __len__(self) -> int:
        return self.size

    def push(self, t: Transition) -> None:
        i = self.cursor
        self.states[i] = t.state
        self.actions[i] = t.action
        self.rewards[i] = t.reward
        self.next_states[i] = t.next_state
        self.dones[i] = float(t.done)
        self.cursor = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample_indices(self, batch_size: int, rng: np.random.Generator) -> np.ndarray:
        if self.size == 0:
            raise ValueError("cannot sample from an empty buffer")
        return rng.integers(0, self.size, size=batch_size)

    def sample(self, batch_size: int, rng: np.random.Generator):
        idx = self.sample_indices(batch_size, rng)
        return self.states[idx], self.actions[idx], self.rewards[idx], self.next_states[idx], self.dones[idx]

    def get(self, i: int) -> Transition:
        return Transition(tuple(self.states[i] > 0.5), int(self.actions[i]), float(self.rewards[i]),
                          tuple(self.next_states[i] > 0.5), bool(self.dones[i]))


# ---------------------------------------------------------------------------
# Q-functions


class TabularQ:
    def __init__(self, n_bits: int, n_actions: int):
        self.table = np.zeros((1 << n_bits, n_actions))

    def values(self, state: Sequence[bool]) -> np.ndarray:
        return self.table[state_index(state)]

    def greedy_action(self, state: Sequence[bool]) -> int:
        return int(np.argmax(self.values(state)))


class NetQ:
    """Online network plus a frozen target copy."""

    def __init__(self, online: Mlp, target: Optional[Mlp] = None):
        self.online = online
        self.target = target if target is not None else online.copy()

    def sync(self) -> None:
        self.target = self.online.copy()

    def values(self, state: Sequence[bool]) -> np.ndarray:
        return self.online.forward(np.asarray(state, dtype=np.float64))

    def greedy_action(self, state: Sequence[bool]) -> int:
        return int(np.argmax(self.values(state)))


QFunction = Union[TabularQ, NetQ]
Policy = Callable[[tuple], int]


def as_policy(q: Union[QFunction, Policy]) -> Policy:
    return q.greedy_action if hasattr(q, "greedy_action") else q


# ---------------------------------------------------------------------------
# Policy evaluation


@dataclass
class EvalResult:
    mean: float
    returns: list[float]
    steps: list[int]


def evaluate_policy(env, q: Union[QFunction, Policy], episodes: int = 20, seed: int = 0,
                    max_step: Optional[int] = None) -> EvalResult:
    """Greedy rollouts from the initial state, summing undiscounted rewards.

    Uses its own random stream, so the environment's state is untouched.
    """
    policy = as_policy(q)
    rng = np.random.default_rng(seed)
    limit = max_step if max_step is not None else env.max_step
    returns, lengths = [], []
    for _ in range(episodes):
        s = env.initial_state
        total, n = 0.0, 0
        while not env.is_terminal(s) and (limit is None or n < limit):
            s, r = env.sample(s, policy(s), rng)
            total += r
            n += 1
        returns.append(total)
        lengths.append(n)
    mean = float(np.mean(returns)) if returns else 0.0
    return EvalResult(mean, returns, lengths)


def reachable_states(env, policy: Policy, start: tuple, limit: int = 1 << 22) -> list[tuple]:
    seen = {start: None}
    frontier = [start]
    while frontier:
        s = frontier.pop()
        if env.is_terminal(s):
            continue
        for nxt, _, _ in env.transitions(s, policy(s)):
            if nxt not in seen:
                if len(seen) >= limit:
                    raise RuntimeError("reachable set too large")
                seen[nxt] = None
                frontier.append(nxt)
    return list(seen)


def policy_value(env, q: Union[QFunction, Policy], gamma: float, start: Optional[tuple] = None) -> float:
    """Exact infinite-horizon discounted value of a deterministic policy from ``start``.

    Solves ``(I - gamma P) v = r`` over the states reachable under the policy.
    """
    policy = as_policy(q)
    start = env.initial_state if start is None else tuple(start)
    states = reachable_states(env, policy, start)
    index = {s: i for i, s in enumerate(states)}
    n = len(states)
    rows, cols, vals = [], [], []
    r = np.zeros(n)
    for i, s in enumerate(states):
        if env.is_terminal(s):
            continue
        for nxt, p, rew in env.transitions(s, policy(s)):
            rows.append(i)
            cols.append(index[nxt])
            vals.append(p)
            r[i] += p * rew
    P = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    A = (sp.identity(n, format="csc") - gamma * P).tocsc()
    v = spla.spsolve(A, r) if n > 1 else r / A.toarray()[0, 0]
    return float(np.atleast_1d(v)[index[start]])
