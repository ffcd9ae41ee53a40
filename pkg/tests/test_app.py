# tests/test_app.py
import pytest
from fastapi.testclient import TestClient

import app as api
from db.results_db import ResultsDB


@pytest.fixture
def client(tmp_path, monkeypatch):
    monkeypatch.setattr(api, "results_db", ResultsDB(str(tmp_path / "runs.db")))
    return TestClient(api.app)


def test_root_lists_endpoints(client):
    response = client.get("/")
    assert response.status_code == 200
    assert "/analyze" in response.json()["endpoints"]


def test_analyze_presets(client):
    response = client.post("/analyze", json={})
    assert response.status_code == 200
    rows = response.json()
    assert len(rows) == 9
    assert rows[0]["architecture"] == "KWS6 134x377"
    assert rows[0]["total"] == 1.130


def test_analyze_custom_architecture(client):
    response = client.post("/analyze", json={"architectures": [{"input_features": 2, "layer_sizes": [2, 1]}]})
    assert response.status_code == 200
    assert response.json()[0]["units"] == 6


def test_analyze_rejects_empty_layers(client):
    response = client.post("/analyze", json={"architectures": [{"input_features": 2, "layer_sizes": []}]})
    assert response.status_code == 400


def test_generate_bad_spec(client):
    response = client.post("/generate", json={"hidden": 0})
    assert response.status_code == 400


def test_compare_is_stored(client):
    response = client.post("/compare", json={"epochs": 1, "seeds": [0]})
    assert response.status_code == 200
    assert response.json()["ok"]
    runs = client.get("/runs", params={"command": "compare"}).json()
    assert len(runs) == 1
