"""Exact value iteration over an enumerable environment."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp

from irs.env import state_index

TIE_TOLERANCE = 1e-12


@dataclass
class MdpTables:
    """Per-action sparse transition matrices and expected rewards, indexed by state rank."""

    states: list[tuple]
    P: list[sp.csr_matrix]
    R: np.ndarray  # (n_actions, n_states)
    terminal: np.ndarray  # bool (n_states,)


def build_tables(env) -> MdpTables:
    space = env.state_space()
    n = len(space)
    terminal = np.array([env.is_terminal(s) for s in space], dtype=bool)
    P, R = [], np.zeros((env.n_actions, n))
    for a in range(env.n_actions):
        rows, cols, vals = [], [], []
        for i, s in enumerate(space):
            if terminal[i]:
                continue
            for nxt, p, r in env.transitions(s, a):
                rows.append(i)
                cols.append(state_index(nxt))
                vals.append(p)
                R[a, i] += p * r
        P.append(sp.csr_matrix((vals, (rows, cols)), shape=(n, n)))
    return MdpTables(space.states, P, R, terminal)


@dataclass
class ViResult:
    values: np.ndarray
    policy: list[Optional[int]]  # None marks a terminal state
    residual: float
    iterations: int
    residuals: list[float] = field(default_factory=list)
    diagnostics: list[str] = field(default_factory=list)
    states: list[tuple] = field(default_factory=list)

    def value(self, state) -> float:
        return float(self.values[state_index(state)])

    def action(self, state) -> Optional[int]:
        return self.policy[state_index(state)]

    def greedy_action(self, state) -> int:
        a = self.action(state)
        return 0 if a is None else a


def _q_values(tables: MdpTables, values: np.ndarray, gamma: float) -> np.ndarray:
    return np.stack([tables.R[a] + gamma * (tables.P[a] @ values) for a in range(len(tables.P))])


def value_iteration(env, gamma: float = 0.99, tolerance: float = 1e-10,
                    max_iterations: int = 1_000_000) -> ViResult:
    """Bellman optimality iteration until the sup-norm change is at most ``tolerance``.

    Terminal states are absorbing with value 0. The greedy policy breaks ties
    toward the lowest action index.
    """
    if env.n_actions == 0:
        raise ValueError(f"{getattr(env, 'name', 'environment')} has no actions")
    tables = build_tables(env)
    n = len(tables.states)
    values = np.zeros(n)
    residuals: list[float] = []
    residual = np.inf
    it = 0
    while residual > tolerance and it < max_iterations:
        q = _q_values(tables, values, gamma)
        new = np.where(tables.terminal, 0.0, q.max(axis=0))
        residual = float(np.max(np.abs(new - values))) if n else 0.0
        residuals.append(residual)
        values = new
        it += 1

    q = _q_values(tables, values, gamma)
    best = q.max(axis=0)
    policy: list[Optional[int]] = []
    for i in range(n):
        if tables.terminal[i]:
            policy.append(None)
        else:
            policy.append(int(np.flatnonzero(q[:, i] >= best[i] - TIE_TOLERANCE)[0]))

    result = ViResult(values, policy, residual, it, residuals, [], tables.states)
    result.diagnostics.extend(_reachability(env, result))
    return result


def _reachability(env, result: ViResult) -> list[str]:
    start = env.initial_state
    seen = {start}
    frontier = [start]
    while frontier:
        s = frontier.pop()
        if env.is_terminal(s):
            return []
        for nxt, _, _ in env.transitions(s, result.policy[state_index(s)]):
            if nxt not in seen:
                seen.add(nxt)
                frontier.append(nxt)
    return [f"{getattr(env, 'name', 'environment')}: no secure state is reachable from the initial state "
            f"under the optimal policy"]
