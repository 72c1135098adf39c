"""Deep Q-learning with experience replay and a periodically synced target network."""

from __future__ import annotations

from typing import Callable, Optional

import numpy as np

from irs.env import StateSpaceTooLarge
from irs.nn import Mlp, MlpSpec
from irs.report import ReportRow, StepClock, TrainingReport, within
from irs.solvers.common import (
    Hyperparams,
    NetQ,
    ReplayBuffer,
    Transition,
    epsilon,
    evaluate_policy,
    policy_value,
)


def mlp_spec_for(env, hidden_size: int = 32, layers: int = 2, learning_rate: float = 0.1) -> MlpSpec:
    return MlpSpec(env.n_bits, hidden_size, layers, env.n_actions, learning_rate)


def greedy_score(env, q, h: Hyperparams, seed: int = 0) -> float:
    """Score of the greedy policy: exact discounted value when enumerable, else mean rollout return."""
    if h.exact_eval:
        try:
            env.state_space()
            return policy_value(env, q, h.gamma)
        except StateSpaceTooLarge:
            pass
    return evaluate_policy(env, q, h.eval_episodes, seed, max_step=h.max_step).mean


def dqn_train(
    env,
    spec: Optional[MlpSpec] = None,
    h: Hyperparams = Hyperparams(),
    seed: int = 0,
    *,
    net: Optional[Mlp] = None,
    reference: Optional[float] = None,
    rel_tol: float = 0.05,
    stop_at_reference: bool = False,
    clock: Optional[Callable[[int], float]] = None,
    on_row: Optional[Callable[[ReportRow], None]] = None,
) -> tuple[NetQ, TrainingReport]:
    """Train a Q-network on ``env`` for ``h.epochs`` episodes.

    Each step picks an epsilon-greedy action, stores the transition and, once
    the replay memory holds a full batch, takes one SGD step toward
    ``r + gamma * (1 - terminal) * max_a' Q_target(s', a')``. The target net
    is refreshed every ``h.target_sync_interval`` steps. Every
    ``h.eval_every`` epochs (and after the last one) the greedy policy is
    scored. With ``stop_at_reference`` training ends at the first score
    within ``rel_tol`` of ``reference``.
    """
    spec = spec or mlp_spec_for(env)
    if spec.input_size != env.n_bits or spec.output_size != env.n_actions:
        raise ValueError(f"network shape {spec.input_size}->{spec.output_size} does not fit "
                         f"environment {env.n_bits}->{env.n_actions}")
    if net is None:
        net = Mlp.init(spec, np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(0xD0,))))
    q = NetQ(net)
    rng = np.random.default_rng(seed)
    env.reseed(seed)
    env.max_step = h.max_step
    clock = clock or StepClock()
    buffer = ReplayBuffer(h.replay_capacity, env.n_bits)
    report = TrainingReport()
    rows_idx = np.arange(h.batch_size)
    steps = 0
    best: Optional[float] = None
    reached: Optional[ReportRow] = None

    for epoch in range(h.epochs):
        eps = epsilon(epoch, h)
        s = env.reset()
        total = 0.0
        while not env.done:
            if rng.random() < eps:
                a = int(rng.integers(env.n_actions))
            else:
                a = q.greedy_action(s)
            s2, r, _ = env.step(a)
            buffer.push(Transition(s, a, r, s2, env.is_terminal(s2)))
            steps += 1
            total += r
            if len(buffer) >= h.batch_size:
                S, A, R, S2, D = buffer.sample(h.batch_size, rng)
                y = R + h.gamma * (1.0 - D) * q.target.forward(S2).max(axis=1)
                targets = q.online.forward(S)
                targets[rows_idx, A] = y
                q.online.train_batch(S, targets)
            if steps % h.target_sync_interval == 0:
                q.sync()
            s = s2

        score = None
        if (epoch + 1) % h.eval_every == 0 or epoch == h.epochs - 1:
            score = greedy_score(env, q, h, seed)
            best = score if best is None else max(best, score)
        row = ReportRow(epoch, steps, clock(steps), total, score)
        report.rows.append(row)
        if on_row is not None:
            on_row(row)
        if score is not None and reference is not None and reached is None and within(score, reference, rel_tol):
            reached = row
            if stop_at_reference:
                break

    report.summary = {
        "epochs_run": len(report.rows),
        "env_steps": steps,
        "best_eval_return": best,
        "final_eval_return": report.evals()[-1].eval_return if report.evals() else None,
        "reference_value": reference,
        "steps_to_threshold": reached.env_steps if reached else None,
        "epoch_to_threshold": reached.epoch if reached else None,
        "wall_ms_to_threshold": reached.wall_clock_ms if reached else None,
    }
    return q, report
