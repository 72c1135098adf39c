"""The ten acceptance criteria, each at its stated tolerance and time budget.

Run alone with ``pytest tests/test_acceptance.py -v``; a PASS/FAIL line per
criterion is printed in the terminal summary.
"""

import subprocess
import sys
import time
from dataclasses import replace

import numpy as np
import pytest

from irs.conditions import format_condition, parse_condition, parse_effects
from irs.config import parse_action_set, parse_topology
from irs.env import AgentAction, JointEnv, PartitionEnv, decompose, reward
from irs.harness import ExperimentConfig, compare
from irs.model import RewardWeights
from irs.report import csv_body
from irs.solvers import TABULAR_DEFAULTS, Hyperparams, dqn_train, policy_value, q_learn_tabular, value_iteration

from conftest import CONFIGS, ROOT
from oracles import expectimax, random_condition, random_model, random_state
from test_config import EXAMPLE_ACTIONS, EXAMPLE_TOPOLOGY, ACTION_POST, ACTION_PRE
from test_nn import gradient_check

SEEDS = range(5)


class Budget:
    def __init__(self, seconds):
        self.seconds = seconds
        self.t0 = time.perf_counter()

    @property
    def elapsed(self):
        return time.perf_counter() - self.t0

    def check(self):
        assert self.elapsed < self.seconds, f"took {self.elapsed:.1f}s, budget {self.seconds}s"


def note(request, text):
    request.node.user_properties.append(("detail", text))


@pytest.mark.criterion(1, "reward: unchanged -2, start -0.2, zero weights 0 (exact)")
def test_criterion_01_reward(request, frontend_model):
    clock = Budget(1)
    model, _ = frontend_model
    start = model.actions["start"]
    assert (start.execution_time, start.cost) == (300.0, 100.0)
    w = RewardWeights(0.5, 0.5, 1000.0, 1000.0)
    a, b = (True, False, False, True, False), (True, True, False, True, False)
    values = (reward(a, start, a, w), reward(a, start, b, w), reward(a, start, b, RewardWeights(0.0, 0.0, 1000, 1000)))
    note(request, f"values {values}, {clock.elapsed * 1000:.1f} ms")
    assert values == (-2.0, -0.2, 0.0)
    clock.check()


@pytest.mark.criterion(2, "parser: example documents verbatim, all OB action conditions, 1000-AST round trip")
def test_criterion_02_parser(request):
    clock = Budget(10)
    topo = parse_topology(EXAMPLE_TOPOLOGY)
    acts = parse_action_set(EXAMPLE_ACTIONS)
    assert topo.types["frontend-service"].state == ["start", "active", "restarted", "corrupted", "shellCorrupted"]
    assert acts.actions["start"].execution_time == 300
    for src, ast in ACTION_PRE.values():
        assert parse_condition(src) == ast
    for src, effects in ACTION_POST.values():
        assert parse_effects(src) == effects
    rng = np.random.default_rng(2024)
    names = ["active", "corrupted", "restarted", "shellCorrupted", "intVuln"]
    for _ in range(1000):
        expr = random_condition(rng, names, depth=6)
        assert parse_condition(format_condition(expr)) == expr
    note(request, f"{clock.elapsed:.2f} s")
    clock.check()


@pytest.mark.criterion(3, "value iteration equals depth-20 expectimax on all 32 frontend states within 1e-6")
def test_criterion_03_oracle(request, frontend_env):
    clock = Budget(30)
    res = value_iteration(frontend_env, 0.99)
    oracle = expectimax(frontend_env.model, 0, 0.99, depth=20)
    gap = max(abs(res.value(s) - oracle(s)) for s in frontend_env.state_space())
    note(request, f"max gap {gap:.2e}, {clock.elapsed:.2f} s")
    assert gap <= 1e-6
    clock.check()


@pytest.mark.criterion(4, "tabular Q greedy value within 0.05 of VI on frontend, 5 seeds")
def test_criterion_04_tabular(request, frontend_env):
    clock = Budget(120)
    ref = value_iteration(frontend_env).value(frontend_env.initial_state)
    gaps = []
    for seed in SEEDS:
        q = q_learn_tabular(frontend_env, TABULAR_DEFAULTS, seed=seed)
        gaps.append(abs(policy_value(frontend_env, q, 0.99) - ref))
    note(request, f"max gap {max(gaps):.4f}, {clock.elapsed:.1f} s")
    assert max(gaps) <= 0.05
    clock.check()


@pytest.mark.criterion(5, "DQN within 5% of VI on frontend within 2000 epochs, at least 4 of 5 seeds")
def test_criterion_05_dqn(request, frontend_env):
    clock = Budget(600)
    ref = value_iteration(frontend_env).value(frontend_env.initial_state)
    epochs = []
    for seed in SEEDS:
        _, rep = dqn_train(frontend_env, None, Hyperparams(epochs=2000), seed=seed, reference=ref,
                           rel_tol=0.05, stop_at_reference=True)
        epochs.append(rep.summary["epoch_to_threshold"])
    reached = sum(e is not None for e in epochs)
    note(request, f"epochs to threshold {epochs}, {clock.elapsed:.1f} s")
    assert reached >= 4
    clock.check()


@pytest.mark.criterion(6, "partition-scope median steps-to-threshold <= system scope on the 2-partition model")
def test_criterion_06_ordering(request, pair_paths):
    clock = Budget(1800)
    base = ExperimentConfig(pair_paths, solver="dqn", scope="partition:frontend-service",
                            hyper=Hyperparams(epochs=2000), clock="steps")
    res = compare(base, replace(base, scope="system"), list(SEEDS))
    part = res.median_steps("first")
    system = res.median_steps("second")
    note(request, f"partition {part}, system {system if system is not None else 'not reached'}, "
                  f"{clock.elapsed:.0f} s")
    assert part is not None
    assert system is None or part <= system
    clock.check()


@pytest.mark.criterion(7, "joint VI equals the sum of partition VIs within 1e-6 on 20 random 2-partition models")
def test_criterion_07_additivity(request):
    clock = Budget(120)
    rng = np.random.default_rng(7)
    worst, bits = 0.0, []
    for _ in range(20):
        model = random_model(rng, max_bits=6)
        init = random_state(rng, model)
        joint = JointEnv(model, init)
        total = sum(value_iteration(e).value(e.initial_state) for e in decompose(model, init))
        worst = max(worst, abs(value_iteration(joint).value(joint.initial_state) - total))
        bits.append(max(p.n_bits for p in model.partitions))
    note(request, f"max gap {worst:.2e}, partition bits <= {max(bits)}, {clock.elapsed:.1f} s")
    assert worst <= 1e-6
    clock.check()


@pytest.mark.criterion(8, "restart clears corruption in 0.75 +- 0.01 of 1e5 seeded steps")
def test_criterion_08_restart(request, frontend_model):
    clock = Budget(30)
    model, _ = frontend_model
    part = model.partitions[0]
    s0 = part.encode({(0, "active"): True, (0, "corrupted"): True})
    env = PartitionEnv(model, 0, s0, seed=8)
    restart = env.action_index(AgentAction("restart"))
    k = part.bit_index(0, "corrupted")
    n, cleared = 100_000, 0
    for _ in range(n):
        env.reset()
        nxt, _, _ = env.step(restart)
        cleared += not nxt[k]
    freq = cleared / n
    note(request, f"frequency {freq:.4f}, {clock.elapsed:.1f} s")
    assert abs(freq - 0.75) <= 0.01
    clock.check()


@pytest.mark.criterion(9, "analytic vs finite-difference gradients, max relative error < 1e-4 over 100 nets")
def test_criterion_09_gradients(request):
    clock = Budget(60)
    err = gradient_check(n_nets=100, seed=0)
    note(request, f"max relative error {err:.2e}, {clock.elapsed:.1f} s")
    assert err < 1e-4
    clock.check()


@pytest.mark.criterion(10, "two identical `irs train` runs give byte-identical CSV bodies")
def test_criterion_10_determinism(request, tmp_path):
    clock = Budget(300)
    d = CONFIGS / "ob-frontend"
    bodies = []
    for name in ("first.csv", "second.csv"):
        out = tmp_path / name
        cmd = [sys.executable, "-m", "irs.cli", "train", "--config-dir", str(d), "--scope",
               "partition:frontend-service", "--solver", "dqn", "--seed", "11", "--clock", "steps",
               "--out", str(out)]
        subprocess.run(cmd, check=True, capture_output=True, cwd=ROOT)
        bodies.append(csv_body(out.read_bytes().decode("utf-8")).encode("utf-8"))
    note(request, f"{len(bodies[0])} bytes, {clock.elapsed:.1f} s")
    assert bodies[0] == bodies[1]
    clock.check()
