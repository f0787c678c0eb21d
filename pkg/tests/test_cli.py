import json

import pytest

from fragility.cli import main
from fragility.configs import builtin_config_text
from fragility.store import read_result

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
def paths(tmp_path):
    config = tmp_path / "selection.json"
    config.write_text(builtin_config_text("selection"))
    table = tmp_path / "table.csv"
    table.write_text(CSV)
    return config, table, tmp_path


def test_validate_selection_config(paths, capsys):
    config, _, _ = paths
    assert main(["validate", str(config)]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["valid"] is True
    assert out["scheme"]["total_dim"] == 258


def test_validate_bad_config(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{\"dag_str\": \"A->A\"}")
    assert main(["validate", str(bad)]) == 1
    err = json.loads(capsys.readouterr().err)
    assert "error" in err


def test_project_prints_edgelist(paths, capsys):
    config, _, _ = paths
    assert main(["project", str(config)]) == 0
    out = capsys.readouterr().out.strip()
    assert out == "A->P, A->S, A->Y, U->P, U->S, U->Y, Y->S"


def test_bound_budget_zero_matches_empirical(paths, capsys):
    config, table, _ = paths
    code = main([
        "bound", str(config), str(table),
        "--metric", "DP", "--delta", "0", "--max-nodes", "40",
    ])
    assert code == 0
    out = json.loads(capsys.readouterr().out)
    assert out["upper"] - out["lower"] <= 2e-3
    assert out["lower"] - 1e-6 <= out["empirical"] <= out["upper"] + 1e-6


def test_sweep_document_roundtrip_and_determinism(paths, capsys):
    config, table, tmp = paths
    out_path = tmp / "result.json"
    argv = [
        "sweep", str(config), str(table),
        "--metric", "DP", "--deltas", "0,0.02",
        "--max-nodes", "25", "--out", str(out_path),
    ]
    assert main(argv) == 0
    text = out_path.read_text().strip()
    doc = read_result(text)
    assert doc.metric == "DP"
    assert len(doc.results) == 2
    assert doc.results[1]["upper"] >= doc.results[0]["upper"] - 1e-12
    # identical invocation reproduces the document byte for byte
    out2 = tmp / "result2.json"
    argv[-1] = str(out2)
    assert main(argv) == 0
    assert out2.read_text() == out_path.read_text()


def test_oracle_fogliato(paths, capsys):
    _, table, _ = paths
    assert main(["oracle", str(table), "--check", "fogliato", "--alpha", "0.05"]) == 0
    out = json.loads(capsys.readouterr().out)
    group = out["groups"]["0"]
    lo, hi = group["FNR"]
    assert lo == pytest.approx(hi)
    assert group["FPR"][0] <= group["FPR"][1]


def test_oracle_fair_projection_and_flip(paths, capsys):
    _, table, _ = paths
    assert main(["oracle", str(table), "--check", "fair-projection"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert set(out) == {"DP", "PVP", "EO"}
    assert out["DP"]["chi2"] >= 0

    assert main([
        "oracle", str(table), "--check", "flip-budget",
        "--criterion", "DP", "--threshold", "0.001",
    ]) == 0
    flip = json.loads(capsys.readouterr().out)
    assert flip["min_budget"] >= 0


def test_bad_metric_is_user_error(paths, capsys):
    config, table, _ = paths
    code = main(["bound", str(config), str(table), "--metric", "WAT", "--delta", "0"])
    assert code == 1
    err = json.loads(capsys.readouterr().err)
    assert "unknown metric" in err["error"]["message"]


def test_missing_file(capsys):
    assert main(["validate", "/does/not/exist.json"]) == 1
    err = json.loads(capsys.readouterr().err)
    assert err["error"]["type"] == "io"
