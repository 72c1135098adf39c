import csv
import json
from dataclasses import replace

import pytest
from hypothesis import given
from hypothesis import strategies as st

from irs.cli import main
from irs.config import ConfigError, ConfigPaths
from irs.harness import (
    EXIT_CONFIG,
    EXIT_OK,
    EXIT_RUNTIME,
    ExperimentConfig,
    compare,
    run_experiment,
    validate_configs,
)
from irs.report import COLUMNS, ReportRow, TrainingReport, csv_body, within
from irs.solvers import TABULAR_DEFAULTS, Hyperparams

from conftest import CONFIGS

FE = "partition:frontend-service"


def cfg_for(paths, **kw):
    base = dict(paths=paths, scope=FE, hyper=Hyperparams(epochs=100, eval_every=20), clock="steps")
    base.update(kw)
    return ExperimentConfig(**base)


# -- reports ------------------------------------------------------------------

rows = st.lists(st.tuples(st.integers(0, 50), st.floats(-50, 0), st.one_of(st.none(), st.floats(-50, 0))),
                max_size=30)


@given(rows, st.dictionaries(st.sampled_from(["a", "b"]), st.integers()))
def test_report_round_trip(raw, summary):
    out, steps = [], 0
    for k, (dn, ret, ev) in enumerate(raw):
        steps += dn
        out.append(ReportRow(k, steps, float(steps), ret, ev))
    rep = TrainingReport({"seed": 1}, out, summary, "2024-01-01T00:00:00")
    assert TrainingReport.from_csv(rep.to_csv()) == rep


def test_within():
    assert within(-0.8, -0.78, 0.05)
    assert not within(-0.9, -0.78, 0.05)


# -- runs ---------------------------------------------------------------------


def test_run_writes_monotone_csv(tmp_path, frontend_paths):
    out = tmp_path / "run.csv"
    rep = run_experiment(cfg_for(frontend_paths, out=out))
    lines = out.read_text().splitlines()
    assert lines[0] == "# irs-report 1"
    assert lines[3] == ",".join(COLUMNS)
    loaded = TrainingReport.read(out)
    assert loaded.rows == rep.rows and loaded.summary == rep.summary
    assert loaded.header["seed"] == 0 and loaded.header["scope"] == FE
    for a, b in zip(loaded.rows, loaded.rows[1:]):
        assert a.epoch <= b.epoch and a.env_steps <= b.env_steps and a.wall_clock_ms <= b.wall_clock_ms
    assert [r.eval_return is not None for r in loaded.rows].count(True) == 5


def test_wall_clock_rows_monotone(tmp_path, frontend_paths):
    rep = run_experiment(cfg_for(frontend_paths, clock="wall", out=tmp_path / "w.csv"))
    ms = [r.wall_clock_ms for r in rep.rows]
    assert ms == sorted(ms)


def test_identical_configs_give_identical_bodies(tmp_path, frontend_paths):
    bodies = []
    for name in ("a.csv", "b.csv"):
        run_experiment(cfg_for(frontend_paths, out=tmp_path / name))
        bodies.append(csv_body((tmp_path / name).read_text()))
    assert bodies[0] == bodies[1]
    assert bodies[0].splitlines()[0] == ",".join(COLUMNS)


def test_frontend_dqn_final_eval_within_5_percent(frontend_paths):
    rep = run_experiment(cfg_for(frontend_paths, hyper=Hyperparams(), seed=1))
    assert within(rep.summary["final_eval_return"], rep.summary["reference_value"], 0.05)


def test_system_scope_converges_to_summed_value(pair_paths):
    rep = run_experiment(cfg_for(pair_paths, scope="system", hyper=Hyperparams(), seed=1, stop_at_threshold=True))
    assert rep.summary["reference_value"] == pytest.approx(-0.77976875 - 1.925075, abs=1e-6)
    assert rep.summary["steps_to_threshold"] is not None


def test_tabular_run(frontend_paths):
    rep = run_experiment(cfg_for(frontend_paths, solver="q", hyper=TABULAR_DEFAULTS))
    assert within(rep.summary["final_eval_return"], rep.summary["reference_value"], 0.05)


def test_vi_table(tmp_path, frontend_paths):
    out = tmp_path / "vi.csv"
    run_experiment(cfg_for(frontend_paths, solver="vi", out=out))
    with out.open() as fh:
        table = list(csv.DictReader(fh))
    assert len(table) == 32
    assert table[0] == {"state_index": "0", "state": "00000", "value": "-0.2", "action": "start[0]"}
    secure = [r for r in table if r["action"] == "<terminal>"]
    assert secure and all(float(r["value"]) == 0.0 for r in secure)


def test_unknown_partition_names_valid_ones(frontend_paths):
    with pytest.raises(ConfigError, match="valid partitions: frontend-service"):
        run_experiment(cfg_for(frontend_paths, scope="partition:nope"))


def test_bad_solver_and_scope(frontend_paths):
    with pytest.raises(ConfigError):
        cfg_for(frontend_paths, solver="ppo")
    with pytest.raises(ConfigError):
        cfg_for(frontend_paths, scope="frontend-service")


# -- comparison ---------------------------------------------------------------


def test_compare_self_equal(frontend_paths):
    cfg = cfg_for(frontend_paths, hyper=Hyperparams(epochs=300, eval_every=25))
    res = compare(cfg, cfg, [2])
    assert res.first == res.second


def test_compare_zero_budget_not_reached(pair_paths):
    cfg = cfg_for(pair_paths, hyper=Hyperparams(epochs=0))
    res = compare(cfg, replace(cfg, scope="system"), [0, 1])
    summary = res.summary()
    assert summary[FE]["median_steps_to_threshold"] == "not reached"
    assert summary["system"]["median_steps_to_threshold"] == "not reached"
    assert "neither" in summary["verdict"]


# -- validation ---------------------------------------------------------------


@pytest.mark.parametrize("name", ["ob", "ob-frontend", "ob-frontend-redis"])
def test_shipped_configs_are_clean(name):
    diags, code = validate_configs(ConfigPaths.in_dir(CONFIGS / name))
    assert code == EXIT_OK
    assert not [d for d in diags if d.severity == "error"]


def test_verbatim_action_table_warnings():
    paths = replace(ConfigPaths.in_dir(CONFIGS / "ob"), actions=CONFIGS / "ob" / "action-set-verbatim.yml")
    diags, code = validate_configs(paths)
    assert code == EXIT_OK
    flagged = sorted(d.path.split(".")[1] for d in diags if d.severity == "warning")
    assert flagged == ["disableDangerousCmd", "healRedisInsecure", "restrictAccess"]


def test_missing_termination_file(tmp_path):
    paths = replace(ConfigPaths.in_dir(CONFIGS / "ob"), termination=tmp_path / "missing.yml")
    diags, code = validate_configs(paths)
    assert code == EXIT_CONFIG
    assert diags[0].path == "termination"


# -- CLI ----------------------------------------------------------------------


def test_cli_validate(capsys):
    assert main(["validate", "--config-dir", str(CONFIGS / "ob-frontend")]) == EXIT_OK
    assert "0 error(s)" in capsys.readouterr().out


def test_cli_exit_codes(tmp_path, capsys):
    d = str(CONFIGS / "ob-frontend")
    assert main(["vi", "--config-dir", d, "--scope", "partition:nope"]) == EXIT_CONFIG
    assert main(["vi", "--config-dir", str(CONFIGS / "ob"), "--scope", "system"]) == EXIT_RUNTIME
    assert main(["validate", "--config-dir", d, "--termination", str(tmp_path / "none.yml")]) == EXIT_CONFIG
    assert main(["train", "--config-dir", d, "--gamma", "1.5"]) == EXIT_CONFIG


def test_cli_vi_summary(tmp_path, capsys):
    out = tmp_path / "vi.csv"
    code = main(["vi", "--config-dir", str(CONFIGS / "ob-frontend"), "--scope", FE, "--out", str(out)])
    assert code == EXIT_OK
    summary = json.loads(capsys.readouterr().out)
    assert summary["initial_value"] == pytest.approx(-0.77976875)
    assert summary["states"] == 32 and out.exists()


def test_cli_train_explicit_paths(tmp_path, capsys):
    d = CONFIGS / "ob-frontend"
    out = tmp_path / "t.csv"
    code = main(["train", "--topology", str(d / "topology-containers.yml"),
                 "--actions", str(d / "action-set-containers.yml"),
                 "--termination", str(d / "termination.yml"), "--weights", str(d / "weights.yml"),
                 "--init-state", str(d / "init-state.yml"), "--scope", FE, "--solver", "q",
                 "--epochs", "50", "--max-step", "20", "--seed", "3", "--out", str(out)])
    assert code == EXIT_OK
    assert json.loads(capsys.readouterr().out)["epochs_run"] == 50
    assert TrainingReport.read(out).header["hyper"]["max_step"] == 20


def test_cli_each_partition(tmp_path, capsys):
    out = tmp_path / "run.csv"
    code = main(["train", "--config-dir", str(CONFIGS / "ob-frontend-redis"), "--each-partition",
                 "--solver", "q", "--epochs", "30", "--out", str(out), "--workers", "2"])
    assert code == EXIT_OK
    summary = json.loads(capsys.readouterr().out)
    assert set(summary) == {"frontend-service", "redis-service"}
    assert (tmp_path / "run-frontend-service.csv").exists()
    assert (tmp_path / "run-redis-service.csv").exists()
