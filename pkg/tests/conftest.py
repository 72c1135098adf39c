from __future__ import annotations

from pathlib import Path

import pytest

from irs.config import ConfigPaths, load_model
from irs.env import PartitionEnv
from irs.model import (
    ActionSpec,
    ComponentType,
    Effect,
    Partition,
    RewardWeights,
    SystemModel,
    TerminationSpec,
    VarEquals,
    VariableDecl,
)

ROOT = Path(__file__).resolve().parents[1]
CONFIGS = ROOT / "configs"


def toy_model(time=300.0, cost=100.0, weights=RewardWeights()) -> SystemModel:
    """One component, one variable ``active``, one deterministic ``start`` action."""
    start = ActionSpec("start", time, cost, VarEquals("active", False), (Effect(1.0, "active", True),), ("svc",))
    ctype = ComponentType("svc", 1, (VariableDecl("active"),), ("start",))
    return SystemModel((Partition.of(ctype),), {"start": start}, weights, TerminationSpec({"active": True}))


@pytest.fixture
def toy_env() -> PartitionEnv:
    return PartitionEnv(toy_model(), 0, (False,), seed=0)


@pytest.fixture(scope="session")
def ob_paths() -> ConfigPaths:
    return ConfigPaths.in_dir(CONFIGS / "ob")


@pytest.fixture(scope="session")
def frontend_paths() -> ConfigPaths:
    return ConfigPaths.in_dir(CONFIGS / "ob-frontend")


@pytest.fixture(scope="session")
def pair_paths() -> ConfigPaths:
    return ConfigPaths.in_dir(CONFIGS / "ob-frontend-redis")


@pytest.fixture(scope="session")
def frontend_model(frontend_paths):
    return load_model(frontend_paths)


@pytest.fixture(scope="session")
def pair_model(pair_paths):
    return load_model(pair_paths)


@pytest.fixture
def frontend_env(frontend_model) -> PartitionEnv:
    model, init = frontend_model
    return PartitionEnv(model, 0, init[0], seed=0)


@pytest.fixture
def redis_env(pair_model) -> PartitionEnv:
    model, init = pair_model
    i = model.partition_index("redis-service")
    return PartitionEnv(model, i, init[i], seed=0)


# -- acceptance reporting ------------------------------------------------------

_CRITERIA: dict[int, tuple[str, str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion checked by this test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or rep.when != "call" and not (rep.when == "setup" and rep.failed):
        return
    number, title = marker.args
    detail = dict(item.user_properties).get("detail", "")
    _CRITERIA[number] = ("PASS" if rep.passed else "FAIL", title, detail)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        status, title, detail = _CRITERIA[number]
        line = f"criterion {number:2d}: {status}  {title}"
        terminalreporter.write_line(f"{line}  [{detail}]" if detail else line)
