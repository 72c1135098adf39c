"""YAML configuration files and model assembly.

Four documents describe a system:

* ``topology-containers.yml``: component types with ``replication`` and an
  ordered ``state`` list,
* ``action-set-containers.yml``: actions with time, cost, pre/post-condition
  and the component types they apply to,
* ``termination.yml``: variable -> required boolean,
* ``weights.yml``: ``wE``, ``wC``, ``eMax``, ``cMax``.

An optional initial-state file maps variable -> boolean (applied to every
component that declares the variable), with per-type overrides.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional, Union

import yaml

from irs.conditions import ConditionSyntaxError, EffectSyntaxError, parse_condition, parse_effects
from irs.model import (
    ActionSpec,
    ComponentType,
    Diagnostic,
    Partition,
    RewardWeights,
    SystemModel,
    SystemState,
    TerminationSpec,
    VariableDecl,
    validate,
)

log = logging.getLogger(__name__)


class ConfigError(ValueError):
    """A configuration document is malformed or the assembled model is invalid."""

    def __init__(self, message: str, diagnostics: Optional[list[Diagnostic]] = None):
        super().__init__(message)
        self.diagnostics = diagnostics or []


class _UniqueKeyLoader(yaml.SafeLoader):
    pass


def _construct_unique_mapping(loader, node, deep=False):
    seen = set()
    for key_node, _ in node.value:
        key = loader.construct_object(key_node, deep=deep)
        if key in seen:
            mark = key_node.start_mark
            raise ConfigError(f"duplicate key {key!r} at line {mark.line + 1}, column {mark.column + 1}")
        seen.add(key)
    return loader.construct_mapping(node, deep=deep)


_UniqueKeyLoader.add_constructor(yaml.resolver.BaseResolver.DEFAULT_MAPPING_TAG, _construct_unique_mapping)


def load_yaml(text: str) -> Any:
    try:
        return yaml.load(text, Loader=_UniqueKeyLoader)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark or exc.context_mark
        where = f" at line {mark.line + 1}, column {mark.column + 1}" if mark else ""
        raise ConfigError(f"YAML syntax error{where}: {exc.problem or exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"YAML error: {exc}") from exc


# ---------------------------------------------------------------------------
# Documents


@dataclass
class TypeEntry:
    replication: int
    state: list[str]


@dataclass
class TopologyDoc:
    types: dict[str, TypeEntry] = field(default_factory=dict)


@dataclass
class ActionEntry:
    execution_time: float
    execution_cost: float
    pre_condition: str
    post_condition: Union[str, list[str]]
    components: list[str]


@dataclass
class ActionSetDoc:
    actions: dict[str, ActionEntry] = field(default_factory=dict)


def parse_topology(text: str) -> TopologyDoc:
    data = load_yaml(text)
    if not data:
        raise ConfigError("no component types")
    if not isinstance(data, dict):
        raise ConfigError("topology must be a mapping of component type -> entry")
    doc = TopologyDoc()
    for name, entry in data.items():
        if not isinstance(entry, dict):
            raise ConfigError(f"{name}: entry must be a mapping")
        for key in ("replication", "state"):
            if key not in entry:
                raise ConfigError(f"{name}: missing {key!r}")
        rep = entry["replication"]
        if isinstance(rep, bool) or not isinstance(rep, int):
            raise ConfigError(f"{name}: replication must be an integer, got {rep!r}")
        if rep < 1:
            raise ConfigError(f"{name}: replication must be positive, got {rep}")
        state = entry["state"]
        if not isinstance(state, list) or not all(isinstance(s, str) for s in state):
            raise ConfigError(f"{name}: state must be a list of variable names")
        doc.types[str(name)] = TypeEntry(rep, list(state))
    return doc


_ACTION_FIELDS = ("execution-time", "execution-cost", "pre-condition", "post-condition", "components")


def parse_action_set(text: str) -> ActionSetDoc:
    data = load_yaml(text)
    if data is None:
        return ActionSetDoc()
    if not isinstance(data, dict):
        raise ConfigError("action set must be a mapping of action name -> entry")
    doc = ActionSetDoc()
    for name, entry in data.items():
        if not isinstance(entry, dict):
            raise ConfigError(f"{name}: entry must be a mapping")
        missing = [f for f in _ACTION_FIELDS if f not in entry]
        if missing:
            raise ConfigError(f"{name}: missing field(s) {', '.join(missing)}")
        nums = {}
        for key in ("execution-time", "execution-cost"):
            value = entry[key]
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ConfigError(f"{name}: {key} must be a number, got {value!r}")
            if value < 0:
                raise ConfigError(f"{name}: {key} must be non-negative, got {value}")
            nums[key] = value
        post = entry["post-condition"]
        if isinstance(post, list):
            post = [str(p) for p in post]
        elif not isinstance(post, str):
            raise ConfigError(f"{name}: post-condition must be a string or a list of strings")
        comps = entry["components"]
        if not isinstance(comps, list) or not all(isinstance(c, str) for c in comps):
            raise ConfigError(f"{name}: components must be a list of component type names")
        pre = entry["pre-condition"]
        if not isinstance(pre, str):
            raise ConfigError(f"{name}: pre-condition must be a string")
        doc.actions[str(name)] = ActionEntry(
            nums["execution-time"], nums["execution-cost"], pre, post, list(comps)
        )
    return doc


def dump_topology(doc: TopologyDoc) -> str:
    data = {name: {"replication": e.replication, "state": list(e.state)} for name, e in doc.types.items()}
    return yaml.safe_dump(data, sort_keys=False)


def dump_action_set(doc: ActionSetDoc) -> str:
    data = {
        name: {
            "execution-time": e.execution_time,
            "execution-cost": e.execution_cost,
            "pre-condition": e.pre_condition,
            "post-condition": e.post_condition,
            "components": list(e.components),
        }
        for name, e in doc.actions.items()
    }
    return yaml.safe_dump(data, sort_keys=False, width=1 << 16)


def parse_termination(text: str) -> TerminationSpec:
    data = load_yaml(text) or {}
    if not isinstance(data, dict):
        raise ConfigError("termination must be a mapping of variable -> boolean")
    for k, v in data.items():
        if not isinstance(v, bool):
            raise ConfigError(f"termination.{k}: expected true or false, got {v!r}")
    return TerminationSpec({str(k): v for k, v in data.items()})


def parse_weights(text: str) -> RewardWeights:
    data = load_yaml(text)
    if not isinstance(data, dict):
        raise ConfigError("weights must be a mapping with wE, wC, eMax, cMax")
    missing = [k for k in ("wE", "wC", "eMax", "cMax") if k not in data]
    if missing:
        raise ConfigError(f"weights: missing {', '.join(missing)}")
    try:
        return RewardWeights(float(data["wE"]), float(data["wC"]), float(data["eMax"]), float(data["cMax"]))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"weights: {exc}") from exc


def parse_initial_state(text: str) -> dict:
    data = load_yaml(text) or {}
    if not isinstance(data, dict):
        raise ConfigError("initial state must be a mapping")
    return data


def initial_state(model: SystemModel, spec: Optional[dict] = None) -> SystemState:
    """Resolve an initial-state mapping against ``model``.

    Top-level ``variable: bool`` entries apply to every component declaring the
    variable. A top-level key naming a component type overrides those values,
    either with one mapping (all components) or a list of mappings (one per
    component). Unlisted variables default to False.
    """
    spec = spec or {}
    flat = {k: v for k, v in spec.items() if not isinstance(v, (dict, list))}
    for k, v in flat.items():
        if not isinstance(v, bool):
            raise ConfigError(f"initial state {k}: expected true or false, got {v!r}")
    type_names = set(model.partition_names)
    for k, v in spec.items():
        if isinstance(v, (dict, list)) and k not in type_names:
            raise ConfigError(f"initial state: unknown component type {k!r}")
    states = []
    for p in model.partitions:
        per_type = spec.get(p.name)
        assignment = {}
        for j in range(p.replication):
            values = {v: flat[v] for v in p.component_type.variable_names if v in flat}
            override = per_type[j] if isinstance(per_type, list) and j < len(per_type) else per_type
            if isinstance(override, dict):
                for var, val in override.items():
                    if var not in p.component_type.variable_names:
                        raise ConfigError(f"initial state {p.name}: unknown variable {var!r}")
                    values[var] = bool(val)
            for var, val in values.items():
                assignment[(j, var)] = val
        states.append(p.encode(assignment))
    return tuple(states)


# ---------------------------------------------------------------------------
# Assembly


def build_model(
    topology: TopologyDoc,
    actions: ActionSetDoc,
    termination: TerminationSpec,
    weights: RewardWeights,
    allow_unknown_types: bool = False,
) -> tuple[Optional[SystemModel], list[Diagnostic]]:
    """Assemble a model and collect every diagnostic; the model is None when errors exist."""
    diags: list[Diagnostic] = []
    specs: dict[str, ActionSpec] = {}
    for name, entry in actions.actions.items():
        path = f"actions.{name}"
        try:
            pre = parse_condition(entry.pre_condition)
        except ConditionSyntaxError as exc:
            diags.append(Diagnostic(f"{path}.pre-condition", str(exc)))
            continue
        notes: list[str] = []
        try:
            effects = parse_effects(entry.post_condition, notes)
        except EffectSyntaxError as exc:
            diags.append(Diagnostic(f"{path}.post-condition", str(exc)))
            continue
        diags.extend(Diagnostic(f"{path}.post-condition", n, "warning") for n in notes)
        applicable = []
        for tname in entry.components:
            if tname in topology.types:
                applicable.append(tname)
            else:
                sev = "warning" if allow_unknown_types else "error"
                diags.append(Diagnostic(f"{path}.components", f"undeclared component type {tname!r}", sev))
        specs[name] = ActionSpec(
            name,
            float(entry.execution_time),
            float(entry.execution_cost),
            pre,
            tuple(effects),
            tuple(applicable),
        )

    partitions = []
    for tname, tentry in topology.types.items():
        bound = tuple(a for a, spec in specs.items() if tname in spec.applicable_types)
        ctype = ComponentType(tname, tentry.replication, tuple(VariableDecl(v) for v in tentry.state), bound)
        partitions.append(Partition.of(ctype))

    model = SystemModel(tuple(partitions), specs, weights, termination)
    diags.extend(validate(model))
    if any(d.severity == "error" for d in diags):
        return None, diags
    return model, diags


def assemble_model(
    topology: TopologyDoc,
    actions: ActionSetDoc,
    termination: TerminationSpec,
    weights: RewardWeights,
    allow_unknown_types: bool = False,
) -> SystemModel:
    model, diags = build_model(topology, actions, termination, weights, allow_unknown_types)
    for d in diags:
        if d.severity == "warning":
            log.warning("%s", d)
    if model is None:
        errors = [d for d in diags if d.severity == "error"]
        raise ConfigError("invalid model:\n" + "\n".join(f"  {d}" for d in errors), errors)
    return model


@dataclass
class ConfigPaths:
    topology: Path
    actions: Path
    termination: Path
    weights: Path
    init_state: Optional[Path] = None

    @classmethod
    def in_dir(cls, directory: Union[str, Path]) -> "ConfigPaths":
        d = Path(directory)
        init = d / "init-state.yml"
        return cls(
            d / "topology-containers.yml",
            d / "action-set-containers.yml",
            d / "termination.yml",
            d / "weights.yml",
            init if init.exists() else None,
        )


def read_config_text(path: Path, what: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read {what} file {path}: {exc.strerror}") from exc


def load_model(paths: ConfigPaths, allow_unknown_types: bool = False) -> tuple[SystemModel, SystemState]:
    """Read all files, assemble the model and resolve the initial state."""
    topo = parse_topology(read_config_text(paths.topology, "topology"))
    acts = parse_action_set(read_config_text(paths.actions, "action set"))
    term = parse_termination(read_config_text(paths.termination, "termination"))
    weights = parse_weights(read_config_text(paths.weights, "weights"))
    model = assemble_model(topo, acts, term, weights, allow_unknown_types)
    init = parse_initial_state(read_config_text(paths.init_state, "initial state")) if paths.init_state else {}
    return model, initial_state(model, init)
