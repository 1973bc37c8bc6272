"""HTTP surface of the VolOcc API, exercised in-process."""

import json

import numpy as np
import pytest
from fastapi.testclient import TestClient

from volocc_api.main import app
from volocc_api.routers.report import reports_storage

SMALL_GRID = {"T": 2.0, "n_per_day": 40, "substeps": 2}


@pytest.fixture
def client(tmp_path, monkeypatch):
    monkeypatch.setenv("VOLOCC_LOG_DIR", str(tmp_path / "logs"))
    reports_storage.clear()
    with TestClient(app) as c:
        yield c
    reports_storage.clear()


def price_payload(n_per_day=20, days=2, seed=0):
    n = n_per_day * days
    rng = np.random.default_rng(seed)
    prices = np.concatenate([[0.0], np.cumsum(rng.normal(scale=n_per_day ** -0.5, size=n))])
    return {"times": [i / n_per_day for i in range(n + 1)], "prices": prices.tolist()}


def test_health_and_root(client):
    response = client.get("/health")
    assert response.status_code == 200
    assert response.json()["status"] == "ok"
    assert "0 runs stored" in response.json()["message"]
    assert client.get("/").json()["status"] == "operational"


def test_simulate(client):
    response = client.post("/simulate", json={"model": {"kind": "cir"}, "grid": SMALL_GRID, "seed": 4})
    assert response.status_code == 200
    data = response.json()
    assert len(data["times"]) == len(data["prices"]) == 81
    assert 0 < data["v_min"] <= data["v_mean"] <= data["v_max"]
    assert data["n_price_jumps"] == 0
    again = client.post("/simulate", json={"model": {"kind": "cir"}, "grid": SMALL_GRID, "seed": 4}).json()
    assert again["prices"] == data["prices"]


def test_simulate_rejects_unknown_model_kind(client):
    response = client.post("/simulate", json={"model": {"kind": "heston"}, "grid": SMALL_GRID})
    assert response.status_code == 422


def test_estimate(client):
    payload = {**price_payload(), "k_n": 10, "trunc": {"kind": "none"}, "alphas": [0.5]}
    response = client.post("/estimate", json=payload)
    assert response.status_code == 200
    data = response.json()
    assert data["n_blocks"] == 4
    assert data["block_length"] == pytest.approx(0.5)
    assert all(b["threshold_used"] is None for b in data["blocks"])
    assert all(b["v_hat"] == b["v_hat_star"] for b in data["blocks"])
    assert data["curve"][-1]["cumulative_time"] == pytest.approx(2.0)
    assert data["quantiles"][0]["alpha_frac"] == 0.5


def test_estimate_bad_times_is_400(client):
    payload = price_payload()
    payload["times"][5] = payload["times"][4]
    response = client.post("/estimate", json={**payload, "k_n": 10})
    assert response.status_code == 400
    detail = response.json()["detail"]
    assert detail["code"] == "INPUT_ERROR"
    assert detail["details"]["endpoint"] == "estimate"


def test_estimate_block_too_long_is_400(client):
    response = client.post("/estimate", json={**price_payload(), "k_n": 100})
    assert response.status_code == 400
    assert response.json()["detail"]["code"] == "CONFIG_ERROR"


def test_density(client):
    payload = {**price_payload(), "k_n": 10, "kernel": {"bandwidth": 0.3}, "eval_points": [0.5, 1.0, 1.5]}
    response = client.post("/density", json=payload)
    assert response.status_code == 200
    data = response.json()
    assert data["bandwidth"] == 0.3
    assert data["mass"] == pytest.approx(2.0, abs=1e-6)
    assert [p["x"] for p in data["points"]] == [0.5, 1.0, 1.5]


def test_mc_run_is_stored_and_reported(client):
    config = {"grid": SMALL_GRID, "n_replicas": 2, "base_seed": 1, "alphas": [0.5]}
    response = client.post("/mc", json=config)
    assert response.status_code == 200
    run = response.json()
    assert run["kind"] == "mc"
    assert len(run["rows"]) == 1

    fetched = client.get(f"/report/run/{run['run_id']}")
    assert fetched.status_code == 200
    assert fetched.json()["rows"] == run["rows"]

    runs = client.get("/report/runs").json()
    assert [r["run_id"] for r in runs] == [run["run_id"]]
    assert runs[0]["n_replicas"] == 2


def test_evt_run(client):
    response = client.post("/evt", json={"n_replicas": 2, "base_seed": 2})
    assert response.status_code == 200
    data = response.json()
    assert data["b_n"] == 440
    assert len(data["maxima"]) == 2


def test_rates_rejects_jump_volatility(client):
    response = client.post("/rates", json={"model": {"kind": "levy_ou_logvol"}, "ladder": [40, 80, 160], "n_replicas": 1})
    assert response.status_code == 400


def test_export_json_and_csv(client, tmp_path):
    run_id = client.post("/mc", json={"grid": SMALL_GRID, "n_replicas": 2, "alphas": [0.25, 0.75]}).json()["run_id"]

    json_path = tmp_path / "export" / "runs.json"
    response = client.post("/report/export", json={"format": "json", "path": str(json_path)})
    assert response.status_code == 200
    assert response.json()["records_exported"] == 1
    exported = json.loads(json_path.read_text(encoding="utf-8"))
    assert exported["reports"][0]["run_id"] == run_id

    csv_path = tmp_path / "export" / "runs.csv"
    response = client.post("/report/export", json={"format": "csv", "path": str(csv_path), "run_id": run_id})
    assert response.status_code == 200
    lines = csv_path.read_text(encoding="utf-8").splitlines()
    assert lines[0] == "run_id,kind,label,metric,value"
    # two alphas, four metrics each
    assert len(lines) == 1 + 8
    assert response.json()["records_exported"] == 8


def test_export_rejects_unknown_format(client, tmp_path):
    response = client.post("/report/export", json={"format": "xml", "path": str(tmp_path / "x")})
    assert response.status_code == 422


def test_delete_and_missing_run(client):
    run_id = client.post("/mc", json={"grid": SMALL_GRID, "n_replicas": 1}).json()["run_id"]
    assert client.delete(f"/report/run/{run_id}").json()["ok"] is True

    response = client.get(f"/report/run/{run_id}")
    assert response.status_code == 404
    detail = response.json()["detail"]
    assert detail["message"] == "Run report not found"
    assert detail["details"]["run_id"] == run_id
    assert client.delete(f"/report/run/{run_id}").status_code == 404
