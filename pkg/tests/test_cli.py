import csv
import json
import subprocess
import sys

import pytest

from memsel.cli import main
from memsel.dataset import write_csv
from memsel.synthgen import SynthSpec, blobs_dataset, synthetic_memory_dataset


@pytest.fixture(scope="module")
def data(tmp_path_factory):
    p = tmp_path_factory.mktemp("cli") / "mem.csv"
    write_csv(synthetic_memory_dataset(n_per_family=10, seed=5), p)
    return str(p)


def test_load_check(data, capsys):
    assert main(["load-check", "--data", data]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["rows"] == 300 and out["features"] == 12
    assert out["family_counts"]["Trojan"]["Zeu"] == 10


def test_score_and_select(data, tmp_path, capsys):
    out = tmp_path / "s.csv"
    assert main(["score", "--data", data, "--task", "type3", "--select", "chi2", "--out", str(out)]) == 0
    rows = list(csv.reader(out.open()))
    assert rows[0] == ["feature_name", "method", "score"] and len(rows) == 13
    assert main(["select", "--data", data, "--task", "family5:Spyware", "--select", "anova", "--fraction", "0.25"]) == 0
    sel = json.loads(capsys.readouterr().out)
    assert sel["k"] == 3 and len(sel["kept_features"]) == 3


def test_train_predict(data, tmp_path, capsys):
    model = tmp_path / "m.npz"
    pred = tmp_path / "p.csv"
    assert main(["train", "--data", data, "--task", "binary", "--classifier", "knn",
                 "--select", "mi", "--fraction", "0.5", "--out", str(model)]) == 0
    assert main(["predict", "--data", data, "--model", str(model), "--out", str(pred)]) == 0
    rows = list(csv.reader(pred.open()))
    assert rows[0] == ["row", "predicted"] and len(rows) == 301
    assert {r[1] for r in rows[1:]} <= {"Benign", "Malware"}


def test_cv_writes_report(data, tmp_path, capsys):
    rep = tmp_path / "r.json"
    assert main(["cv", "--data", data, "--task", "type3", "--classifier", "lda", "--select", "anova",
                 "--fraction", "0.5", "--mode", "global", "--folds", "3", "--out", str(rep)]) == 0
    d = json.loads(rep.read_text())
    assert d["provenance"]["selection_mode"] == "global" and len(d["folds"]) == 3
    assert "macro-F1" in capsys.readouterr().out


def test_grid_and_render(data, tmp_path, capsys):
    out = tmp_path / "res"
    assert main(["grid", "--data", data, "--task", "type3", "--classifier", "lda,knn",
                 "--fraction", "0.5,1.0", "--out", str(out)]) == 0
    capsys.readouterr()
    assert main(["render", "--out", str(out), "--format", "csv"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0].startswith("classifier,100% F1") and len(lines) == 3


def test_grid_failures_exit_4(tmp_path):
    p = tmp_path / "neg.csv"
    ds, _ = blobs_dataset(SynthSpec(100, 4, 2, 4, 5.0, 0))
    write_csv(ds, p)
    assert main(["grid", "--data", str(p), "--task", "type3", "--classifier", "mnb", "--fraction", "1.0",
                 "--out", str(tmp_path / "r")]) == 4


def test_chi2_min_shift_flag(tmp_path):
    p = tmp_path / "neg.csv"
    ds, _ = blobs_dataset(SynthSpec(100, 4, 2, 4, 5.0, 0))
    write_csv(ds, p)
    args = ["score", "--data", str(p), "--task", "type3", "--select", "chi2"]
    assert main(args) == 3
    assert main(args + ["--min-shift"]) == 0


@pytest.mark.parametrize("argv, code", [
    (["cv", "--data", "x.csv", "--task", "quad"], 2),
    (["cv", "--data", "/no/such.csv"], 3),
    (["cv", "--data", "x.csv", "--classifier", "svm", "--task", "binary"], 2),
    (["frobnicate"], 2),
    (["render", "--out", "/no/such/dir"], 2),
])
def test_exit_codes(argv, code, data, capsys):
    argv = [data if a == "x.csv" else a for a in argv]
    assert main(argv) == code


def test_bad_data_exit_3(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("Category,a,Class\nBenign,zz,Benign\n")
    assert main(["load-check", "--data", str(p)]) == 3


def test_console_script(data):
    r = subprocess.run([sys.executable, "-m", "memsel.cli", "load-check", "--data", data],
                       capture_output=True, text=True)
    assert r.returncode == 0 and '"rows": 300' in r.stdout
