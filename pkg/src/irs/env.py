"""Stochastic dynamics over partitions.

``PartitionEnv`` simulates one partition; ``SystemEnv`` runs every partition
side by side with one optional action per partition per step; ``JointEnv``
wraps a ``SystemEnv`` as a single agent whose actions are tuples of
per-partition actions. All three expose the same small interface used by the
solvers: ``reset``, ``step``, ``transitions``, ``is_terminal``,
``state_space``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from irs.model import (
    ActionSpec,
    And,
    ConditionExpr,
    Not,
    Or,
    Partition,
    PartitionState,
    RewardWeights,
    SystemModel,
    SystemState,
    TerminationSpec,
    VarEquals,
)

DEFAULT_MAX_STEP = 50
DEFAULT_BIT_CAP = 20
UNCHANGED_PENALTY = -2.0


class EnvError(RuntimeError):
    pass


class StateSpaceTooLarge(EnvError):
    pass


@dataclass(frozen=True)
class AgentAction:
    action: str
    component: int = 0

    def __str__(self) -> str:
        return f"{self.action}[{self.component}]"


def partition_rng(seed: int, partition_index: int) -> np.random.Generator:
    """Independent stream for one partition, derived from the master seed."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(partition_index,)))


# ---------------------------------------------------------------------------
# Pure functions


def evaluate(expr: ConditionExpr, assignment) -> bool:
    if isinstance(expr, VarEquals):
        return bool(assignment[expr.variable]) == expr.value
    if isinstance(expr, And):
        return evaluate(expr.left, assignment) and evaluate(expr.right, assignment)
    if isinstance(expr, Or):
        return evaluate(expr.left, assignment) or evaluate(expr.right, assignment)
    if isinstance(expr, Not):
        return not evaluate(expr.child, assignment)
    raise TypeError(f"not a condition node: {expr!r}")


def eval_precondition(expr: ConditionExpr, partition: Partition, state: PartitionState, component: int) -> bool:
    return evaluate(expr, partition.component_view(state, component))


def reward(prev: PartitionState, action: ActionSpec, nxt: PartitionState, weights: RewardWeights) -> float:
    if prev == nxt:
        return UNCHANGED_PENALTY
    cost = weights.w_time * action.execution_time / weights.max_time + weights.w_cost * action.cost / weights.max_cost
    return 0.0 - cost


def is_terminal_partition(spec: TerminationSpec, partition: Partition, state: PartitionState) -> bool:
    names = partition.component_type.variable_names
    q = len(names)
    for k, var in enumerate(names):
        want = spec.required.get(var)
        if want is None:
            continue
        for j in range(partition.replication):
            if state[j * q + k] != want:
                return False
    return True


def is_terminal_system(spec: TerminationSpec, model: SystemModel, state: SystemState) -> bool:
    return all(is_terminal_partition(spec, p, s) for p, s in zip(model.partitions, state))


def state_index(state: Sequence[bool]) -> int:
    """Lexicographic rank of a bit tuple (first bit most significant)."""
    idx = 0
    for b in state:
        idx = (idx << 1) | bool(b)
    return idx


class StateSpace:
    """Every boolean vector of ``n_bits`` bits in lexicographic order."""

    def __init__(self, n_bits: int, cap: int = DEFAULT_BIT_CAP):
        if n_bits > cap:
            raise StateSpaceTooLarge(f"{n_bits} state bits exceeds the cap of {cap}")
        self.n_bits = n_bits
        self.states = list(itertools.product((False, True), repeat=n_bits))

    def __len__(self) -> int:
        return len(self.states)

    def __iter__(self):
        return iter(self.states)

    def __getitem__(self, i: int) -> tuple:
        return self.states[i]

    def index(self, state: Sequence[bool]) -> int:
        return state_index(state)


# ---------------------------------------------------------------------------
# Partition environment


class PartitionEnv:
    """One partition as an episodic MDP.

    Actions are flattened as ``action_index * replication + component``; an
    ``AgentAction`` or that flat index can be passed to ``step``.
    """

    def __init__(
        self,
        model: SystemModel,
        partition_index: int,
        initial: Optional[PartitionState] = None,
        seed: int = 0,
        max_step: Optional[int] = DEFAULT_MAX_STEP,
        bit_cap: int = DEFAULT_BIT_CAP,
    ):
        self.model = model
        self.partition_index = partition_index
        self.partition = model.partitions[partition_index]
        self.weights = model.weights
        self.specs: list[ActionSpec] = model.actions_for(self.partition)
        m = self.partition.replication
        self.actions = [AgentAction(s.name, j) for s in self.specs for j in range(m)]
        self.n_actions = len(self.actions)
        self.n_bits = self.partition.n_bits
        self.max_step = max_step
        self.bit_cap = bit_cap
        self.initial_state = tuple(initial) if initial is not None else (False,) * self.n_bits
        if len(self.initial_state) != self.n_bits:
            raise EnvError(f"initial state has {len(self.initial_state)} bits, expected {self.n_bits}")
        self.seed = seed
        self.rng = partition_rng(seed, partition_index)
        self._q = self.partition.n_vars
        names = self.partition.component_type.variable_names
        self._offsets = {var: k for k, var in enumerate(names)}
        self._constraints = [
            (j * self._q + k, want)
            for k, var in enumerate(names)
            if (want := model.termination.required.get(var)) is not None
            for j in range(m)
        ]
        self._cache: dict = {}
        self.reset()

    @property
    def name(self) -> str:
        return self.partition.name

    def reseed(self, seed: int) -> None:
        self.seed = seed
        self.rng = partition_rng(seed, self.partition_index)

    def reset(self) -> PartitionState:
        self.state = self.initial_state
        self.step_count = 0
        self.done = self.is_terminal(self.state)
        return self.state

    def is_terminal(self, state: PartitionState) -> bool:
        return all(state[b] == want for b, want in self._constraints)

    def action_index(self, action: Union[AgentAction, int]) -> int:
        if isinstance(action, (int, np.integer)):
            if not 0 <= action < self.n_actions:
                raise EnvError(f"{self.name}: action index {action} out of range [0, {self.n_actions})")
            return int(action)
        names = [s.name for s in self.specs]
        if action.action not in names:
            raise EnvError(f"{self.name}: action {action.action!r} is not valid for this partition")
        if not 0 <= action.component < self.partition.replication:
            raise EnvError(
                f"{self.name}: component index {action.component} out of range [0, {self.partition.replication})"
            )
        return names.index(action.action) * self.partition.replication + action.component

    def _split(self, a: int) -> tuple[ActionSpec, int]:
        m = self.partition.replication
        return self.specs[a // m], a % m

    def enabled(self, state: PartitionState, a: int) -> bool:
        spec, j = self._split(a)
        return eval_precondition(spec.precondition, self.partition, state, j)

    def sample(self, state: PartitionState, a: int, rng: np.random.Generator) -> tuple[PartitionState, float]:
        """Draw one successor. One uniform is consumed per effect whenever the precondition holds."""
        spec, j = self._split(a)
        if not eval_precondition(spec.precondition, self.partition, state, j):
            return state, reward(state, spec, state, self.weights)
        bits = list(state)
        base = j * self._q
        for eff in spec.effects:
            if rng.random() < eff.probability:
                bits[base + self._offsets[eff.variable]] = eff.value
        nxt = tuple(bits)
        return nxt, reward(state, spec, nxt, self.weights)

    def step(self, action: Union[AgentAction, int]) -> tuple[PartitionState, float, bool]:
        if self.done:
            raise EnvError(f"{self.name}: episode is over; call reset()")
        a = self.action_index(action)
        self.state, r = self.sample(self.state, a, self.rng)
        self.step_count += 1
        terminal = self.is_terminal(self.state)
        self.done = terminal or (self.max_step is not None and self.step_count >= self.max_step)
        return self.state, r, self.done

    def transition_dist(self, state: PartitionState, action: Union[AgentAction, int]) -> list[tuple[PartitionState, float]]:
        return [(s, p) for s, p, _ in self.transitions(state, self.action_index(action))]

    def transitions(self, state: PartitionState, a: int) -> list[tuple[PartitionState, float, float]]:
        """Exact successor distribution as ``(next, probability, reward)``, merged by next state."""
        key = (state, a)
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        spec, j = self._split(a)
        if not eval_precondition(spec.precondition, self.partition, state, j):
            out = [(state, 1.0, reward(state, spec, state, self.weights))]
        else:
            branches = {state: 1.0}
            base = j * self._q
            for eff in spec.effects:
                bit = base + self._offsets[eff.variable]
                grown: dict = {}
                for s, p in branches.items():
                    if eff.probability > 0.0:
                        fired = s[:bit] + (eff.value,) + s[bit + 1:]
                        grown[fired] = grown.get(fired, 0.0) + p * eff.probability
                    if eff.probability < 1.0:
                        grown[s] = grown.get(s, 0.0) + p * (1.0 - eff.probability)
                branches = grown
            out = [(s, p, reward(state, spec, s, self.weights)) for s, p in branches.items() if p > 0.0]
        self._cache[key] = out
        return out

    def state_space(self) -> StateSpace:
        return StateSpace(self.n_bits, self.bit_cap)

    enumerate = state_space

    def action_labels(self) -> list[str]:
        return [str(a) for a in self.actions]

    def input_labels(self) -> list[str]:
        return [f"{j}:{v}" for j, v in self.partition.bit_labels()]


def decompose(
    model: SystemModel,
    initial: Optional[SystemState] = None,
    seed: int = 0,
    max_step: Optional[int] = DEFAULT_MAX_STEP,
    bit_cap: int = DEFAULT_BIT_CAP,
) -> list[PartitionEnv]:
    """One environment per partition, each owning only its variables and actions."""
    return [
        PartitionEnv(model, i, initial[i] if initial is not None else None, seed, max_step, bit_cap)
        for i in range(len(model.partitions))
    ]


# ---------------------------------------------------------------------------
# System environment


class SystemEnv:
    """All partitions stepped together, each on its own random stream."""

    def __init__(
        self,
        model: SystemModel,
        initial: Optional[SystemState] = None,
        seed: int = 0,
        bit_cap: int = DEFAULT_BIT_CAP,
    ):
        self.model = model
        self.envs = decompose(model, initial, seed, max_step=None, bit_cap=bit_cap)
        self.bit_cap = bit_cap

    @property
    def states(self) -> SystemState:
        return tuple(e.state for e in self.envs)

    @property
    def initial_state(self) -> SystemState:
        return tuple(e.initial_state for e in self.envs)

    def reset(self) -> SystemState:
        for e in self.envs:
            e.reset()
        return self.states

    def is_terminal(self, state: Optional[SystemState] = None) -> bool:
        state = self.states if state is None else state
        return all(e.is_terminal(s) for e, s in zip(self.envs, state))

    def joint_step(
        self, actions: Sequence[Optional[Union[AgentAction, int]]]
    ) -> tuple[SystemState, list[float], bool]:
        """Apply at most one action per partition; rewards are listed for acting partitions only."""
        if len(actions) != len(self.envs):
            raise EnvError(f"expected {len(self.envs)} action slots, got {len(actions)}")
        errors = []
        resolved = []
        for env, act in zip(self.envs, actions):
            if act is None:
                resolved.append(None)
                continue
            try:
                if env.done:
                    raise EnvError(f"{env.name}: partition is already secure")
                resolved.append(env.action_index(act))
            except EnvError as exc:
                errors.append(f"partition {env.name}: {exc}")
        if errors:
            raise EnvError("; ".join(errors))
        rewards = []
        for env, a in zip(self.envs, resolved):
            if a is not None:
                _, r, _ = env.step(a)
                rewards.append(r)
        return self.states, rewards, self.is_terminal()


class JointEnv:
    """A ``SystemEnv`` seen by one agent.

    Joint actions are the Cartesian product of the partitions' flattened
    action lists. Partitions already in a secure state are frozen and earn
    no reward, so the joint return is the sum of the partition returns.
    States are the concatenation of the partition states.
    """

    def __init__(
        self,
        model: SystemModel,
        initial: Optional[SystemState] = None,
        seed: int = 0,
        max_step: Optional[int] = DEFAULT_MAX_STEP,
        bit_cap: int = DEFAULT_BIT_CAP,
    ):
        self.model = model
        self.system = SystemEnv(model, initial, seed, bit_cap)
        self.parts = self.system.envs
        self.sizes = [e.n_bits for e in self.parts]
        self.n_bits = sum(self.sizes)
        self.actions = list(itertools.product(*(range(e.n_actions) for e in self.parts)))
        self.n_actions = len(self.actions)
        self.max_step = max_step
        self.bit_cap = bit_cap
        self.initial_state = self.flatten(self.system.initial_state)
        self.name = "system"
        self._cache: dict = {}
        self.reset()

    def flatten(self, state: SystemState) -> tuple:
        return tuple(itertools.chain.from_iterable(state))

    def split(self, flat: Sequence[bool]) -> SystemState:
        out, lo = [], 0
        for n in self.sizes:
            out.append(tuple(flat[lo:lo + n]))
            lo += n
        return tuple(out)

    def reseed(self, seed: int) -> None:
        for e in self.parts:
            e.reseed(seed)

    def reset(self) -> tuple:
        self.system.reset()
        self.state = self.initial_state
        self.step_count = 0
        self.done = self.is_terminal(self.state)
        return self.state

    def is_terminal(self, state: Sequence[bool]) -> bool:
        return all(e.is_terminal(s) for e, s in zip(self.parts, self.split(state)))

    def step(self, action: int) -> tuple[tuple, float, bool]:
        if self.done:
            raise EnvError("system: episode is over; call reset()")
        combo = self.actions[action]
        slots = [None if e.done else a for e, a in zip(self.parts, combo)]
        states, rewards, terminal = self.system.joint_step(slots)
        self.state = self.flatten(states)
        self.step_count += 1
        self.done = terminal or (self.max_step is not None and self.step_count >= self.max_step)
        return self.state, float(sum(rewards)), self.done

    def sample(self, state: Sequence[bool], a: int, rng: np.random.Generator) -> tuple[tuple, float]:
        parts, total = [], 0.0
        for env, s, sub in zip(self.parts, self.split(state), self.actions[a]):
            if env.is_terminal(s):
                parts.append(s)
                continue
            nxt, r = env.sample(s, sub, rng)
            parts.append(nxt)
            total += r
        return self.flatten(parts), total

    def transitions(self, state: Sequence[bool], a: int) -> list[tuple[tuple, float, float]]:
        key = (tuple(state), a)
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        per_part = []
        for env, s, sub in zip(self.parts, self.split(state), self.actions[a]):
            per_part.append([(s, 1.0, 0.0)] if env.is_terminal(s) else env.transitions(s, sub))
        out = []
        for combo in itertools.product(*per_part):
            p = 1.0
            r = 0.0
            for _, pk, rk in combo:
                p *= pk
                r += rk
            out.append((self.flatten([c[0] for c in combo]), p, r))
        self._cache[key] = out
        return out

    def transition_dist(self, state, a: int) -> list[tuple[tuple, float]]:
        return [(s, p) for s, p, _ in self.transitions(state, a)]

    def state_space(self) -> StateSpace:
        return StateSpace(self.n_bits, self.bit_cap)

    def action_labels(self) -> list[str]:
        return ["|".join(str(e.actions[i]) for e, i in zip(self.parts, combo)) for combo in self.actions]

    def input_labels(self) -> list[str]:
        return [f"{e.name}/{lbl}" for e in self.parts for lbl in e.input_labels()]
