import json
import subprocess
import sys

import numpy as np
import pytest

from treeattr import fixtures, synthetic
from treeattr.cli import main
from treeattr.plot_export import read_records


@pytest.fixture
def fx(tmp_path):
    assert main(["fixtures", "--out-dir", str(tmp_path)]) == 0
    return tmp_path


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_fixtures_files(fx):
    names = {p.name for p in fx.iterdir()}
    assert {"model_a.json", "model_b.json", "data.csv", "yes_yes.csv", "expectations.json"} <= names
    exp = json.loads((fx / "expectations.json").read_text())
    assert exp["model_a"]["expected_value"] == 20.0 and exp["model_b"]["expected_value"] == 25.0
    assert exp["model_b"]["saabas_yes_yes"] == [40.0, 25.0]
    assert exp["model_b"]["treeshap_yes_yes"] == [30.0, 35.0]


@pytest.mark.parametrize("method, phi", [("treeshap", [30.0, 30.0]), ("saabas", [20.0, 40.0]), ("brute", [30.0, 30.0])])
def test_explain_model_a(capsys, fx, method, phi):
    code, out, _ = run(capsys, "explain", "--model", fx / "model_a.json", "--data", fx / "yes_yes.csv",
                       "--method", method)
    assert code == 0
    row = json.loads(out)["rows"][0]
    assert row["phi"] == pytest.approx(phi) and row["phi0"] == 20.0 and row["output"] == 80.0


def test_explain_csv_and_out_file(capsys, fx, tmp_path):
    out_path = tmp_path / "phi.csv"
    code, out, _ = run(capsys, "explain", "--model", fx / "model_b.json", "--data", fx / "data.csv",
                       "--format", "csv", "--out", out_path)
    assert code == 0 and out == ""
    recs = read_records(out_path, (int, float, float, float, float))
    assert out_path.read_text().splitlines()[0] == "row,phi0,Fever,Cough,output"
    assert recs[3] == (3, 25.0, 30.0, 35.0, 90.0)


def test_brute_too_many_features(capsys, tmp_path):
    ens = synthetic.ensemble_using_features(np.random.default_rng(0), 30, n_trees=4, depth=6)
    (tmp_path / "m.json").write_text(ens.to_json())
    (tmp_path / "d.csv").write_text(",".join(f"f{i}" for i in range(30)) + "\n" + ",".join(["0.5"] * 30) + "\n")
    code, out, err = run(capsys, "explain", "--model", tmp_path / "m.json", "--data", tmp_path / "d.csv",
                         "--method", "brute")
    assert code != 0 and "exceeds the cap" in err and out == ""


def test_missing_file_named(capsys, fx):
    code, _, err = run(capsys, "explain", "--model", fx / "nope.json", "--data", fx / "data.csv")
    assert code != 0 and "nope.json" in err


def test_bad_model_reports_location(capsys, fx, tmp_path):
    doc = json.loads((fx / "model_a.json").read_text())
    doc["trees"][0]["covers"][1] = 3.0
    (tmp_path / "bad.json").write_text(json.dumps(doc))
    code, _, err = run(capsys, "explain", "--model", tmp_path / "bad.json", "--data", fx / "data.csv")
    assert code == 2 and "tree 0, node 0" in err


def test_width_mismatch(capsys, fx, tmp_path):
    (tmp_path / "d.csv").write_text("a,b,c\n1,2,3\n")
    code, _, err = run(capsys, "explain", "--model", fx / "model_a.json", "--data", tmp_path / "d.csv")
    assert code == 2 and "columns" in err


def test_interactions(capsys, fx):
    code, out, _ = run(capsys, "interactions", "--model", fx / "model_a.json", "--data", fx / "yes_yes.csv")
    assert code == 0
    assert json.loads(out)["rows"][0]["interactions"] == [[20.0, 10.0], [10.0, 20.0]]


@pytest.mark.parametrize("method, top", [("gain", "Fever"), ("split", "Fever"), ("mean-abs-shap", "Cough")])
def test_global_importance(capsys, fx, method, top):
    code, out, _ = run(capsys, "global-importance", "--model", fx / "model_b.json", "--data", fx / "data.csv",
                       "--method", method, "--format", "csv")
    assert code == 0
    rows = read_records(out, (str, float, int))
    assert [r[0] for r in rows if r[2] == 0] == [top]


def test_permutation_with_labels(capsys, fx):
    code, out, _ = run(capsys, "global-importance", "--model", fx / "model_b.json", "--data", fx / "data.csv",
                       "--method", "permutation", "--labels", fx / "labels_b.csv", "--repeats", 200)
    assert code == 0
    imp = {d["feature"]: d["value"] for d in json.loads(out)["importance"]}
    assert imp["Cough"] > imp["Fever"]


def test_deterministic_output(capsys, fx):
    argv = ["perturb", "--model", fx / "model_b.json", "--data", fx / "data.csv", "--method", "saabas", "--seed", 3]
    assert run(capsys, *argv)[1] == run(capsys, *argv)[1]


def test_cluster_and_plots(capsys, fx):
    code, out, _ = run(capsys, "cluster", "--model", fx / "model_b.json", "--data", fx / "data.csv")
    curves = json.loads(out)["curves"]
    assert code == 0 and curves["treeshap"]["r2"][0] == 1.0 and curves["saabas"]["r2"][-1] == 0.0
    code, out, _ = run(capsys, "summary", "--model", fx / "model_b.json", "--data", fx / "data.csv")
    assert code == 0 and out.splitlines()[1].startswith("Cough,0,")
    code, out, err = run(capsys, "dependence", "--model", fx / "model_a.json", "--data", fx / "data.csv",
                         "--feature", "Fever")
    assert code == 0 and "Cough" in err and out.startswith("row,x,phi,color")
    code, out, _ = run(capsys, "interaction-dependence", "--model", fx / "model_a.json", "--data",
                       fx / "yes_yes.csv", "--feature", "Fever", "--other", "Cough")
    assert code == 0 and "0,1.0,20.0" in out and "0,1.0,10.0,1.0" in out


def test_unknown_feature(capsys, fx):
    code, _, err = run(capsys, "dependence", "--model", fx / "model_a.json", "--data", fx / "data.csv",
                       "--feature", "Age")
    assert code == 2 and "Age" in err


def test_verify_commands(capsys):
    code, out, _ = run(capsys, "verify", "--seed", 1, "--trials", 100)
    assert code == 0 and json.loads(out)["passed"]
    code, _, err = run(capsys, "verify", "--trials", 0)
    assert code == 0 and "no trials" in err
    code, _, err = run(capsys, "verify", "--trials", 10, "--inject-error", 1e-6)
    assert code == 1 and "FAILED" in err


def test_bench_commands(capsys):
    code, _, err = run(capsys, "bench", "--repeats", 0)
    assert code != 0 and "repeats" in err
    code, out, _ = run(capsys, "bench", "--trees", 5, "--depths", "2,3", "--features", "4,6", "--paired",
                       "--repeats", 1)
    lines = out.splitlines()
    assert code == 0 and lines[0].startswith("method,backend,T,D,M")
    assert len(lines) == 5
    code, out, _ = run(capsys, "bench", "--mode", "work", "--trees", 3, "--depths", "2,4", "--features", 20)
    assert code == 0 and len(out.splitlines()) == 3


def test_module_entry_point(fx):
    proc = subprocess.run([sys.executable, "-m", "treeattr", "explain", "--model", str(fx / "model_b.json"),
                           "--data", str(fx / "yes_yes.csv")], capture_output=True, text=True)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["rows"][0]["phi"] == [30.0, 35.0]
