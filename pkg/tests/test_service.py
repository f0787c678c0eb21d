import json
import time

import pytest
from fastapi.testclient import TestClient

from fragility.configs import builtin_config, builtin_config_text
from fragility.service import create_app

CSV = """A,Y,Yhat,count
0,0,0,300
0,0,1,150
0,1,0,100
0,1,1,200
1,0,0,250
1,0,1,150
1,1,0,150
1,1,1,200
"""


@pytest.fixture
def client():
    app = create_app(workers=2)
    with TestClient(app) as tc:
        yield tc


def _wait(client, analysis_id, timeout=120.0):
    deadline = time.time() + timeout
    while time.time() < deadline:
        body = client.get(f"/analyses/{analysis_id}").json()
        if body["status"] in ("done", "failed", "cancelled"):
            return body
        time.sleep(0.2)
    raise AssertionError("analysis did not finish in time")


def test_validate_selection_config(client):
    config = json.loads(builtin_config_text("selection"))
    body = client.post("/configs/validate", json={"config": config}).json()
    assert body["valid"] is True
    assert body["scheme_dims"]["total_dim"] == 258
    assert "Y->S" in body["projected_edgelist"]


def test_validate_bad_config(client):
    body = client.post("/configs/validate", json={"config": {"dag_str": "A->A"}}).json()
    assert body["valid"] is False
    assert body["errors"]


def test_table_upload_and_metrics(client):
    body = client.post("/tables", json={"csv": CSV}).json()
    assert body["total"] == 1500
    assert body["empirical"]["DP"] == pytest.approx((350 / 750) - (350 / 750))
    bad = client.post("/tables", json={"csv": "x,y\n1,2"})
    assert bad.status_code == 400


def test_metric_catalog(client):
    body = client.get("/metrics").json()
    names = {m["name"] for m in body["metrics"]}
    assert {"DP", "EO", "CF", "TE", "SE", "CF_FPRP", "FPR"} <= names
    by_name = {m["name"]: m for m in body["metrics"]}
    assert by_name["CF_FPRP"]["requires_policy"]
    assert by_name["EO"]["pair"]


def test_analysis_lifecycle_matches_cli_document(client, tmp_path):
    table_id = client.post("/tables", json={"csv": CSV}).json()["table_id"]
    config = json.loads(builtin_config_text("proxy"))
    req = {
        "config": config,
        "table_id": table_id,
        "metric": "DP",
        "deltas": [0.0, 0.02],
        "seed": 0,
        "options": {"max_nodes": 25},
    }
    analysis_id = client.post("/analyses", json=req).json()["analysis_id"]
    body = _wait(client, analysis_id)
    assert body["status"] == "done"
    assert len(body["partial"]) == 2
    document = body["document"]

    # CLI parity for identical inputs and seed
    from fragility.cli import main

    cfg = tmp_path / "proxy.json"
    cfg.write_text(builtin_config_text("proxy"))
    tbl = tmp_path / "t.csv"
    tbl.write_text(CSV)
    out = tmp_path / "res.json"
    assert main([
        "sweep", str(cfg), str(tbl), "--metric", "DP",
        "--deltas", "0,0.02", "--max-nodes", "25", "--out", str(out),
    ]) == 0
    assert json.loads(out.read_text()) == document


def test_unknown_ids_and_validation_errors(client):
    assert client.get("/analyses/nope").status_code == 404
    assert client.delete("/analyses/nope").status_code == 404
    bad = client.post("/analyses", json={
        "config": {"dag_str": "A->A"}, "table_id": "x", "metric": "DP", "deltas": [0.0],
    })
    assert bad.status_code == 400
    table_id = client.post("/tables", json={"csv": CSV}).json()["table_id"]
    bad2 = client.post("/analyses", json={
        "config": json.loads(builtin_config_text("proxy")),
        "table_id": table_id, "metric": "NOPE", "deltas": [0.0],
    })
    assert bad2.status_code == 400


def test_duplicate_submission_conflict(client):
    table_id = client.post("/tables", json={"csv": CSV}).json()["table_id"]
    req = {
        "config": json.loads(builtin_config_text("proxy")),
        "table_id": table_id,
        "metric": "DP",
        "deltas": [0.0],
        "options": {"max_nodes": 5},
        "idempotency_key": "abc",
    }
    first = client.post("/analyses", json=req)
    assert first.status_code == 202
    second = client.post("/analyses", json=req)
    assert second.status_code == 409
    assert second.json()["analysis_id"] == first.json()["analysis_id"]


def test_cancel_keeps_certified_prefix(client):
    table_id = client.post("/tables", json={"csv": CSV}).json()["table_id"]
    req = {
        "config": json.loads(builtin_config_text("proxy")),
        "table_id": table_id,
        "metric": "PPP",
        "deltas": [0.0, 0.01, 0.02, 0.03, 0.04, 0.05],
        "options": {"max_nodes": 60},
    }
    analysis_id = client.post("/analyses", json=req).json()["analysis_id"]
    time.sleep(1.5)
    cancel = client.delete(f"/analyses/{analysis_id}").json()
    assert cancel["status"] in ("cancelled", "running", "done")
    body = _wait(client, analysis_id)
    assert body["status"] in ("cancelled", "done")
    for entry in body["partial"]:
        assert entry["lower"] <= entry["upper"]
