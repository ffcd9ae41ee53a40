# tests/test_config_cli.py
import json
from fractions import Fraction
from pathlib import Path

import pytest

import run
from config import ConfigError, default_config, load_config, parse_config
from db.results_db import ResultsDB

XOR_CONFIG = str(Path(__file__).resolve().parent.parent / "data" / "configs" / "xor.json")


def test_xor_config_matches_the_default_spec(xor_spec):
    cfg = load_config(XOR_CONFIG)
    spec = cfg.network_spec()
    assert spec.dataset == xor_spec.dataset
    assert spec.learning_rates == (Fraction(3, 5),)
    assert spec.epoch_budget == 100
    assert cfg.run.seeds == [0, 1, 2]


def test_default_config():
    spec = default_config().network_spec()
    assert (spec.features, spec.hidden) == (2, 2)


def test_unknown_key_is_rejected():
    with pytest.raises(ConfigError):
        parse_config({"spec": {"features": 2, "neurons": 3}})


def test_bad_dataset_is_rejected():
    with pytest.raises(ConfigError):
        parse_config({"spec": {"dataset": [{"bits": "012", "label": 1}]}})
    with pytest.raises(ConfigError):
        parse_config({"spec": {"dataset": [{"bits": "001", "label": 1}]}})
    with pytest.raises(ConfigError):
        parse_config({"spec": {"learning_rates": ["0.35"]}})


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(str(tmp_path / "nope.json"))


def test_generate_writes_native_and_pnml(tmp_path, capsys):
    code = run.main(["generate", XOR_CONFIG, "--format", "pnml", "--out", str(tmp_path)])
    assert code == run.EXIT_OK
    assert (tmp_path / "bnn.net").exists()
    assert (tmp_path / "bnn.pnml").exists()
    assert "places=" in capsys.readouterr().out


def test_export_converts_a_saved_net(tmp_path):
    assert run.main(["generate", "--no-instrument", "--out", str(tmp_path)]) == run.EXIT_OK
    code = run.main(["export", str(tmp_path / "bnn.net"), "--format", "dot", "--out", str(tmp_path)])
    assert code == run.EXIT_OK
    assert (tmp_path / "bnn.dot").read_text().startswith("digraph")


def test_analyze_writes_tables(tmp_path):
    assert run.main(["analyze", "--out", str(tmp_path)]) == run.EXIT_OK
    for name in ("sizes.csv", "groups.csv", "estimates.csv"):
        assert (tmp_path / name).exists()


def test_simulate_one_epoch(tmp_path):
    code = run.main(["simulate", "--no-budget", "--epochs", "1", "--seed", "2", "--out", str(tmp_path)])
    assert code == run.EXIT_OK
    records = json.loads((tmp_path / "metrics.json").read_text())
    assert [r["vector_index"] for r in records] == [0, 1, 2, 3]
    assert (tmp_path / "loss_rate.csv").exists()


def test_compare_one_epoch(tmp_path):
    code = run.main(["compare", "--epochs", "1", "--seeds", "0,1", "--out", str(tmp_path)])
    assert code == run.EXIT_OK
    assert json.loads((tmp_path / "lockstep.json").read_text())["ok"]


def test_input_errors_exit_with_three(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"spec": {"hidden": 0}}))
    assert run.main(["analyze", str(bad), "--out", str(tmp_path)]) == run.EXIT_INPUT
    assert run.main(["simulate", "--seeds", "a,b", "--out", str(tmp_path)]) == run.EXIT_INPUT
    assert run.main(["export", str(tmp_path / "missing.net")]) == run.EXIT_INPUT


def test_db_flag_records_the_run(tmp_path):
    db_path = str(tmp_path / "runs.db")
    assert run.main(["analyze", "--out", str(tmp_path), "--db", db_path]) == run.EXIT_OK
    runs = ResultsDB(db_path).list_runs("analyze")
    assert len(runs) == 1
    assert runs[0]["exit_code"] == 0


def test_budget_without_epoch_budget_is_an_input_error(tmp_path):
    cfg = tmp_path / "unbudgeted.json"
    cfg.write_text(json.dumps({"spec": {"epoch_budget": None}}))
    assert run.main(["simulate", str(cfg), "--out", str(tmp_path)]) == run.EXIT_INPUT
    assert run.main(["simulate", str(cfg), "--no-budget", "--epochs", "1", "--out", str(tmp_path)]) == run.EXIT_OK
