"""Experiment runner: config validation, VI tables, training runs and
partition-versus-system comparisons."""

from __future__ import annotations

import csv
import logging
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Optional, Union

from irs.config import (
    ConfigError,
    ConfigPaths,
    read_config_text,
    build_model,
    initial_state,
    load_model,
    parse_action_set,
    parse_initial_state,
    parse_termination,
    parse_topology,
    parse_weights,
)
from irs.env import JointEnv, PartitionEnv, StateSpaceTooLarge, decompose
from irs.model import Diagnostic, SystemModel
from irs.nn import MlpSpec
from irs.report import ReportRow, ReportWriter, TrainingReport, make_clock, within
from irs.solvers import Hyperparams, dqn_train, greedy_score, q_learn_tabular, value_iteration
from irs.solvers.transfer import save_checkpoint

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


class BudgetError(RuntimeError):
    pass


@dataclass
class ExperimentConfig:
    paths: ConfigPaths
    solver: str = "dqn"  # vi | q | dqn
    scope: str = "system"  # system | partition:<name>
    hyper: Hyperparams = field(default_factory=Hyperparams)
    hidden_size: int = 32
    layers: int = 2
    learning_rate: float = 0.1
    alpha: Optional[float] = None  # tabular step size; None = 1/visits
    seed: int = 0
    out: Optional[Path] = None
    clock: str = "wall"
    threshold: float = 0.05
    stop_at_threshold: bool = False
    vi_tolerance: float = 1e-10
    checkpoint: Optional[Path] = None

    def __post_init__(self):
        if self.solver not in ("vi", "q", "dqn"):
            raise ConfigError(f"unknown solver {self.solver!r}; expected vi, q or dqn")
        if self.scope != "system" and not self.scope.startswith("partition:"):
            raise ConfigError(f"scope must be 'system' or 'partition:<name>', got {self.scope!r}")
        if self.clock not in ("wall", "steps"):
            raise ConfigError(f"unknown clock {self.clock!r}")

    def resolved(self) -> dict:
        """Everything that determines the run, JSON-ready."""
        d = asdict(self)
        d["paths"] = {k: (str(v) if v is not None else None) for k, v in asdict(self.paths).items()}
        d["out"] = None
        d["checkpoint"] = None
        return d


def make_env(model: SystemModel, init, scope: str, seed: int, max_step: int):
    if scope == "system":
        return JointEnv(model, init, seed, max_step)
    name = scope.split(":", 1)[1]
    if name not in model.partition_names:
        raise ConfigError(f"unknown partition {name!r}; valid partitions: {', '.join(model.partition_names)}")
    i = model.partition_index(name)
    return PartitionEnv(model, i, init[i], seed, max_step)


def reference_value(model: SystemModel, init, env, gamma: float, tolerance: float = 1e-10) -> Optional[float]:
    """Optimal discounted value from the initial state, or None when nothing is enumerable.

    For the whole system the joint state space is solved directly when it fits
    the cap; otherwise the per-partition optima are summed.
    """
    try:
        return value_iteration(env, gamma, tolerance).value(env.initial_state)
    except StateSpaceTooLarge:
        if not isinstance(env, JointEnv):
            return None
    try:
        return sum(value_iteration(e, gamma, tolerance).value(e.initial_state) for e in decompose(model, init))
    except StateSpaceTooLarge:
        return None


# ---------------------------------------------------------------------------
# Runs


def run_vi(cfg: ExperimentConfig):
    model, init = load_model(cfg.paths)
    env = make_env(model, init, cfg.scope, cfg.seed, cfg.hyper.max_step)
    try:
        result = value_iteration(env, cfg.hyper.gamma, cfg.vi_tolerance)
    except StateSpaceTooLarge as exc:
        raise BudgetError(str(exc)) from exc
    if cfg.out is not None:
        write_vi_table(cfg.out, env, result)
    for d in result.diagnostics:
        log.warning("%s", d)
    return env, result


def write_vi_table(path: Union[str, Path], env, result) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    labels = env.action_labels()
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["state_index", "state", "value", "action"])
        for i, s in enumerate(result.states):
            a = result.policy[i]
            w.writerow([i, "".join("1" if b else "0" for b in s), repr(float(result.values[i])),
                        "<terminal>" if a is None else labels[a]])


def run_experiment(cfg: ExperimentConfig, reference: Optional[float] = None) -> TrainingReport:
    """Load configs, build the scoped environment, train, and stream the report to ``cfg.out``.

    ``reference`` skips solving for the optimal value when the caller already has it.
    """
    if cfg.solver == "vi":
        env, result = run_vi(cfg)
        value = result.value(env.initial_state)
        return TrainingReport(header=cfg.resolved(), summary={"reference_value": value,
                                                              "diagnostics": result.diagnostics})

    model, init = load_model(cfg.paths)
    env = make_env(model, init, cfg.scope, cfg.seed, cfg.hyper.max_step)
    ref = reference if reference is not None else reference_value(model, init, env, cfg.hyper.gamma,
                                                                   cfg.vi_tolerance)
    header = cfg.resolved()
    writer = ReportWriter(cfg.out, header) if cfg.out is not None else None
    clock = make_clock(cfg.clock)
    rows: list[ReportRow] = []

    def emit(row: ReportRow) -> None:
        rows.append(row)
        if writer is not None:
            writer(row)

    if cfg.solver == "dqn":
        spec = MlpSpec(env.n_bits, cfg.hidden_size, cfg.layers, env.n_actions, cfg.learning_rate)
        q, report = dqn_train(env, spec, cfg.hyper, cfg.seed, reference=ref, rel_tol=cfg.threshold,
                              stop_at_reference=cfg.stop_at_threshold, clock=clock, on_row=emit)
        summary = report.summary
        if cfg.checkpoint is not None:
            save_checkpoint(q, env, cfg.checkpoint)
    else:
        try:
            env.state_space()
        except StateSpaceTooLarge as exc:
            if writer is not None:
                writer.close()
            raise BudgetError(str(exc)) from exc
        h = cfg.hyper
        state = {"reached": None, "best": None}

        def on_episode(epoch, steps, total, q) -> bool:
            score = None
            if (epoch + 1) % h.eval_every == 0 or epoch == h.epochs - 1:
                score = greedy_score(env, q, h, cfg.seed)
                state["best"] = score if state["best"] is None else max(state["best"], score)
            row = ReportRow(epoch, steps, clock(steps), total, score)
            emit(row)
            if score is not None and ref is not None and state["reached"] is None and within(score, ref, cfg.threshold):
                state["reached"] = row
                return cfg.stop_at_threshold
            return False

        q_learn_tabular(env, h, cfg.alpha, cfg.seed, on_episode=on_episode)
        reached = state["reached"]
        evals = [r for r in rows if r.eval_return is not None]
        summary = {
            "epochs_run": len(rows),
            "env_steps": rows[-1].env_steps if rows else 0,
            "best_eval_return": state["best"],
            "final_eval_return": evals[-1].eval_return if evals else None,
            "reference_value": ref,
            "steps_to_threshold": reached.env_steps if reached else None,
            "epoch_to_threshold": reached.epoch if reached else None,
            "wall_ms_to_threshold": reached.wall_clock_ms if reached else None,
        }

    if writer is not None:
        report = writer.close(summary)
    else:
        report = TrainingReport(header=header, rows=rows, summary=summary)
    return report


def _train_one(cfg: ExperimentConfig) -> TrainingReport:
    return run_experiment(cfg)


def train_partitions(cfg: ExperimentConfig, workers: Optional[int] = None) -> dict[str, TrainingReport]:
    """Train one agent per partition in parallel worker processes."""
    model, _ = load_model(cfg.paths)
    names = model.partition_names
    cfgs = []
    for name in names:
        out = None
        if cfg.out is not None:
            out = Path(cfg.out).with_name(f"{Path(cfg.out).stem}-{name}{Path(cfg.out).suffix or '.csv'}")
        cfgs.append(replace(cfg, scope=f"partition:{name}", out=out))
    with ProcessPoolExecutor(max_workers=workers or len(names)) as pool:
        reports = list(pool.map(_train_one, cfgs))
    return dict(zip(names, reports))


# ---------------------------------------------------------------------------
# Comparison


@dataclass
class ScopeOutcome:
    scope: str
    seed: int
    steps_to_threshold: Optional[int]
    wall_ms_to_threshold: Optional[float]
    reference_value: Optional[float]

    @property
    def reached(self) -> bool:
        return self.steps_to_threshold is not None


@dataclass
class Comparison:
    first: list[ScopeOutcome]
    second: list[ScopeOutcome]

    @staticmethod
    def _median(values) -> Optional[float]:
        vals = [float("inf") if v is None else float(v) for v in values]
        if not vals:
            return None
        m = statistics.median(vals)
        return None if m == float("inf") else m

    def median_steps(self, which: str) -> Optional[float]:
        return self._median(o.steps_to_threshold for o in getattr(self, which))

    def median_wall_ms(self, which: str) -> Optional[float]:
        return self._median(o.wall_ms_to_threshold for o in getattr(self, which))

    @property
    def verdict(self) -> str:
        a, b = self.median_steps("first"), self.median_steps("second")
        fa = float("inf") if a is None else a
        fb = float("inf") if b is None else b
        if a is None and b is None:
            return "neither scope reached the threshold"
        name_a, name_b = self.first[0].scope, self.second[0].scope
        return f"{name_a} {'<=' if fa <= fb else '>'} {name_b} (median env steps to threshold)"

    def summary(self) -> dict:
        def fmt(v):
            return "not reached" if v is None else v
        out = {"verdict": self.verdict}
        for which in ("first", "second"):
            outs = getattr(self, which)
            out[outs[0].scope if outs else which] = {
                "median_steps_to_threshold": fmt(self.median_steps(which)),
                "median_wall_ms_to_threshold": fmt(self.median_wall_ms(which)),
                "per_seed": [{"seed": o.seed, "steps": fmt(o.steps_to_threshold),
                              "wall_ms": fmt(o.wall_ms_to_threshold)} for o in outs],
                "reference_value": outs[0].reference_value if outs else None,
            }
        return out


def compare(first: ExperimentConfig, second: ExperimentConfig, seeds: list[int]) -> Comparison:
    """Run both scopes on every seed and report steps and wall-clock to the threshold."""
    res = Comparison([], [])
    for cfg, bucket in ((first, res.first), (second, res.second)):
        model, init = load_model(cfg.paths)
        env = make_env(model, init, cfg.scope, cfg.seed, cfg.hyper.max_step)
        ref = reference_value(model, init, env, cfg.hyper.gamma, cfg.vi_tolerance)
        for seed in seeds:
            run = replace(cfg, seed=seed, stop_at_threshold=True, out=None, checkpoint=None)
            rep = run_experiment(run, reference=ref)
            bucket.append(ScopeOutcome(cfg.scope, seed, rep.summary.get("steps_to_threshold"),
                                       rep.summary.get("wall_ms_to_threshold"), rep.summary.get("reference_value")))
    return res


# ---------------------------------------------------------------------------
# Validation


def _probe_effects(model: SystemModel) -> list[Diagnostic]:
    """Flag actions whose effects push a termination-constrained variable away from its secure value."""
    out = []
    req = model.termination.required
    for spec in model.actions.values():
        bad = [e for e in spec.effects if e.variable in req and e.value != req[e.variable] and e.probability > 0]
        if bad:
            what = ", ".join(f"{e.variable}={'true' if e.value else 'false'} (P={e.probability:g})" for e in bad)
            out.append(Diagnostic(f"actions.{spec.name}.post-condition",
                                  f"sets {what}, which can only move away from a secure state", "warning"))
    return out


def validate_configs(paths: ConfigPaths, allow_unknown_types: bool = False) -> tuple[list[Diagnostic], int]:
    diags: list[Diagnostic] = []
    docs = {}
    for key, parser in (("topology", parse_topology), ("actions", parse_action_set),
                        ("termination", parse_termination), ("weights", parse_weights)):
        try:
            docs[key] = parser(read_config_text(getattr(paths, key), key))
        except ConfigError as exc:
            diags.append(Diagnostic(key, str(exc)))
    if len(docs) < 4:
        return diags, EXIT_CONFIG
    model, found = build_model(docs["topology"], docs["actions"], docs["termination"], docs["weights"],
                               allow_unknown_types)
    diags.extend(found)
    if model is None:
        return diags, EXIT_CONFIG

    declared = {v for p in model.partitions for v in p.component_type.variable_names}
    for var in model.termination.required:
        if var not in declared:
            diags.append(Diagnostic(f"termination.{var}", "no component type declares this variable", "warning"))
    diags.extend(_probe_effects(model))

    init = None
    if paths.init_state is not None:
        try:
            init = initial_state(model, parse_initial_state(read_config_text(paths.init_state, "initial state")))
        except ConfigError as exc:
            diags.append(Diagnostic("init-state", str(exc)))
            return diags, EXIT_CONFIG
    for env in decompose(model, init):
        if env.n_actions == 0:
            diags.append(Diagnostic(f"topology.{env.name}", "no actions apply to this component type", "warning"))
            continue
        try:
            diags.extend(Diagnostic(f"topology.{env.name}", d, "warning") for d in value_iteration(env).diagnostics)
        except StateSpaceTooLarge:
            pass
    code = EXIT_CONFIG if any(d.severity == "error" for d in diags) else EXIT_OK
    return diags, code
