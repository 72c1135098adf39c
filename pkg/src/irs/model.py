"""Domain types for partitioned system models.

A system is a list of partitions. Each partition holds every component of one
component type; components carry the same ordered set of boolean state
variables. Partition states are flat boolean tuples laid out component-major,
then in variable declaration order.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Mapping, Union

PartitionState = tuple  # tuple[bool, ...]
SystemState = tuple  # tuple[PartitionState, ...]


@dataclass(frozen=True)
class Diagnostic:
    path: str
    message: str
    severity: str = "error"

    def __str__(self) -> str:
        return f"{self.severity}: {self.path}: {self.message}"


# ---------------------------------------------------------------------------
# Condition AST


@dataclass(frozen=True)
class VarEquals:
    variable: str
    value: bool


@dataclass(frozen=True)
class And:
    left: "ConditionExpr"
    right: "ConditionExpr"


@dataclass(frozen=True)
class Or:
    left: "ConditionExpr"
    right: "ConditionExpr"


@dataclass(frozen=True)
class Not:
    child: "ConditionExpr"


ConditionExpr = Union[VarEquals, And, Or, Not]


def condition_variables(expr: ConditionExpr) -> set[str]:
    """Names of all variables referenced by ``expr``."""
    if isinstance(expr, VarEquals):
        return {expr.variable}
    if isinstance(expr, Not):
        return condition_variables(expr.child)
    return condition_variables(expr.left) | condition_variables(expr.right)


# ---------------------------------------------------------------------------
# Actions


@dataclass(frozen=True)
class Effect:
    probability: float
    variable: str
    value: bool


@dataclass(frozen=True)
class ActionSpec:
    name: str
    execution_time: float
    cost: float
    precondition: ConditionExpr
    effects: tuple[Effect, ...]
    applicable_types: tuple[str, ...]


@dataclass(frozen=True)
class RewardWeights:
    w_time: float = 0.5
    w_cost: float = 0.5
    max_time: float = 1000.0
    max_cost: float = 1000.0


@dataclass(frozen=True)
class TerminationSpec:
    """Required values for constrained variables; anything absent is free."""

    required: Mapping[str, bool] = field(default_factory=dict)


# ---------------------------------------------------------------------------
# Topology


@dataclass(frozen=True)
class VariableDecl:
    name: str
    role: str = ""


@dataclass(frozen=True)
class ComponentType:
    name: str
    replication: int
    variables: tuple[VariableDecl, ...]
    actions: tuple[str, ...] = ()

    @property
    def variable_names(self) -> tuple[str, ...]:
        return tuple(v.name for v in self.variables)


@dataclass(frozen=True)
class Component:
    type_name: str
    index: int


@dataclass(frozen=True)
class Partition:
    component_type: ComponentType
    components: tuple[Component, ...]

    @classmethod
    def of(cls, ctype: ComponentType) -> "Partition":
        comps = tuple(Component(ctype.name, j) for j in range(max(ctype.replication, 0)))
        return cls(ctype, comps)

    @property
    def name(self) -> str:
        return self.component_type.name

    @property
    def replication(self) -> int:
        return len(self.components)

    @property
    def n_vars(self) -> int:
        return len(self.component_type.variables)

    @property
    def n_bits(self) -> int:
        return self.replication * self.n_vars

    def bit_index(self, component: int, variable: str) -> int:
        return component * self.n_vars + self.component_type.variable_names.index(variable)

    def bit_labels(self) -> list[tuple[int, str]]:
        return [(j, v) for j in range(self.replication) for v in self.component_type.variable_names]

    def encode(self, assignment: Mapping[tuple[int, str], bool]) -> PartitionState:
        """Build a state from a ``(component, variable) -> bool`` map; missing keys are False."""
        return tuple(bool(assignment.get(label, False)) for label in self.bit_labels())

    def decode(self, state: PartitionState) -> dict[tuple[int, str], bool]:
        if len(state) != self.n_bits:
            raise ValueError(f"state has {len(state)} bits, partition {self.name} has {self.n_bits}")
        return dict(zip(self.bit_labels(), state))

    def component_view(self, state: PartitionState, component: int) -> dict[str, bool]:
        lo = component * self.n_vars
        return dict(zip(self.component_type.variable_names, state[lo:lo + self.n_vars]))


@dataclass(frozen=True)
class SystemModel:
    partitions: tuple[Partition, ...]
    actions: Mapping[str, ActionSpec]
    weights: RewardWeights = RewardWeights()
    termination: TerminationSpec = TerminationSpec()

    def partition(self, name: str) -> Partition:
        for p in self.partitions:
            if p.name == name:
                return p
        raise KeyError(name)

    def partition_index(self, name: str) -> int:
        for i, p in enumerate(self.partitions):
            if p.name == name:
                return i
        raise KeyError(name)

    @property
    def partition_names(self) -> list[str]:
        return [p.name for p in self.partitions]

    def components(self) -> Iterator[Component]:
        for p in self.partitions:
            yield from p.components

    def actions_for(self, partition: Partition) -> list[ActionSpec]:
        return [self.actions[name] for name in partition.component_type.actions]

    def encode(self, assignment: Mapping[str, Mapping[tuple[int, str], bool]]) -> SystemState:
        return tuple(p.encode(assignment.get(p.name, {})) for p in self.partitions)


def validate(model: SystemModel) -> list[Diagnostic]:
    """Check every structural invariant of ``model``; one diagnostic per violation."""
    out: list[Diagnostic] = []
    seen_components: set[tuple[str, int]] = set()
    type_names = [p.name for p in model.partitions]

    for p in model.partitions:
        ct = p.component_type
        path = f"topology.{ct.name}"
        if ct.replication < 1:
            out.append(Diagnostic(f"{path}.replication", f"replication must be >= 1, got {ct.replication}"))
        names = ct.variable_names
        for dup in sorted({n for n in names if names.count(n) > 1}):
            out.append(Diagnostic(f"{path}.state", f"duplicate variable {dup!r}"))
        if len(p.components) != max(ct.replication, 0):
            out.append(Diagnostic(path, f"{len(p.components)} components for replication {ct.replication}"))
        for c in p.components:
            key = (c.type_name, c.index)
            if c.type_name != ct.name:
                out.append(Diagnostic(path, f"component {key} filed under the wrong partition"))
            if key in seen_components:
                out.append(Diagnostic(path, f"component {key} appears in more than one partition"))
            seen_components.add(key)
        for a in ct.actions:
            if a not in model.actions:
                out.append(Diagnostic(f"{path}.actions", f"unknown action {a!r}"))

    if len(set(type_names)) != len(type_names):
        out.append(Diagnostic("topology", "duplicate component type names"))

    by_name = {p.name: p.component_type for p in model.partitions}
    for spec in model.actions.values():
        path = f"actions.{spec.name}"
        if spec.execution_time < 0:
            out.append(Diagnostic(f"{path}.execution-time", "must be non-negative"))
        if spec.cost < 0:
            out.append(Diagnostic(f"{path}.execution-cost", "must be non-negative"))
        if not spec.effects:
            out.append(Diagnostic(f"{path}.post-condition", "effect list is empty"))
        for k, eff in enumerate(spec.effects):
            if not 0.0 <= eff.probability <= 1.0:
                out.append(Diagnostic(f"{path}.post-condition[{k}]", f"probability {eff.probability} outside [0, 1]"))
        referenced = condition_variables(spec.precondition) | {e.variable for e in spec.effects}
        for tname in spec.applicable_types:
            ct = by_name.get(tname)
            if ct is None:
                continue
            for var in sorted(referenced - set(ct.variable_names)):
                out.append(Diagnostic(path, f"variable {var!r} is not declared on component type {tname!r}"))

    w = model.weights
    for label, value in (("wE", w.w_time), ("wC", w.w_cost)):
        if not 0.0 <= value <= 1.0:
            out.append(Diagnostic(f"weights.{label}", f"{value} outside [0, 1]"))
    if w.max_time <= 0:
        out.append(Diagnostic("weights.eMax", "must be positive"))
    if w.max_cost <= 0:
        out.append(Diagnostic("weights.cMax", "must be positive"))
    if model.actions:
        top_time = max(a.execution_time for a in model.actions.values())
        top_cost = max(a.cost for a in model.actions.values())
        if w.max_time < top_time:
            out.append(Diagnostic("weights.eMax", f"{w.max_time} below largest execution time {top_time}"))
        if w.max_cost < top_cost:
            out.append(Diagnostic("weights.cMax", f"{w.max_cost} below largest cost {top_cost}"))
    return out
