# tests/test_results_db.py
from db.results_db import ResultsDB


def test_store_and_get(tmp_path):
    db = ResultsDB(str(tmp_path / "nested" / "runs.db"))
    run_id = db.store_run("verify", {"tier": "segment"}, 0, {"as_expected": 12})
    assert run_id
    stored = db.get_run(run_id)
    assert stored["command"] == "verify"
    assert stored["config"] == {"tier": "segment"}
    assert stored["summary"]["as_expected"] == 12


def test_list_filters_by_command(tmp_path):
    db = ResultsDB(str(tmp_path / "runs.db"))
    db.store_run("analyze", {}, 0, {})
    db.store_run("compare", {}, 1, {"ok": False})
    assert [r["command"] for r in db.list_runs("compare")] == ["compare"]
    assert len(db.list_runs()) == 2
    assert len(db.list_runs(limit=1)) == 1


def test_unknown_run(tmp_path):
    assert ResultsDB(str(tmp_path / "runs.db")).get_run("missing") is None


def test_env_default_path(tmp_path, monkeypatch):
    path = tmp_path / "env.db"
    monkeypatch.setenv("PETRIBNN_DB_PATH", str(path))
    assert ResultsDB().db_path == str(path)
    assert path.exists()
