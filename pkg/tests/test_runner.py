import json

import numpy as np
import pytest

from memsel.runner import (
    MISSING,
    Bundle,
    Cell,
    ExperimentConfig,
    emit_confusions,
    grid_cells,
    load_bundle,
    render_table,
    run_experiments,
    settings,
)
from memsel.synthgen import SynthSpec, blobs_dataset, synthetic_memory_dataset


@pytest.fixture(scope="module")
def memds():
    return synthetic_memory_dataset(n_per_family=12, seed=1)


def test_config_validation():
    with pytest.raises(ValueError):
        ExperimentConfig(fractions=(0.0,))
    with pytest.raises(ValueError):
        ExperimentConfig(classifiers=())
    with pytest.raises(ValueError):
        ExperimentConfig(tasks=())
    with pytest.raises(ValueError):
        ExperimentConfig(methods=("lasso",))
    with pytest.raises(ValueError):
        ExperimentConfig(classifiers=("svm",))


def test_full_grid_size():
    cfg = ExperimentConfig()
    assert len(settings(cfg.fractions, cfg.methods)) == 7
    assert len(grid_cells(cfg)) == 5 * 6 * 7


def test_single_cell_bundle(tmp_path):
    ds, _ = blobs_dataset(SynthSpec(200, 6, 3, 2, 5.0, 0))
    cfg = ExperimentConfig(tasks=("binary",), classifiers=("knn",), fractions=(1.0,), out=str(tmp_path))
    bundle = run_experiments(cfg, dataset=ds)
    assert len(bundle.reports) == 1
    table = render_table(bundle, "binary")
    lines = [ln for ln in table.splitlines() if ln.startswith("K-NN")]
    assert len(lines) == 1 and "*" in lines[0]
    assert (tmp_path / "confusions" / "binary" / "knn__none__100.csv").is_file()


def test_resume_and_hash(tmp_path, memds):
    cfg = ExperimentConfig(tasks=("type3", "family5:Trojan"), classifiers=("lda", "knn"), out=str(tmp_path))
    first = run_experiments(cfg, dataset=memds)
    assert not first.failures()
    assert all(not c["cached"] for c in first.manifest["cells"])
    tables = {p.name: p.read_text() for p in (tmp_path / "tables").iterdir()}
    cell_file = tmp_path / first.manifest["cells"][0]["file"]
    stamp = cell_file.stat().st_mtime_ns
    second = run_experiments(cfg, dataset=memds)
    assert all(c["cached"] for c in second.manifest["cells"])
    assert second.bundle_hash == first.bundle_hash
    assert cell_file.stat().st_mtime_ns == stamp
    assert tables == {p.name: p.read_text() for p in (tmp_path / "tables").iterdir()}


def test_changed_seed_recomputes(tmp_path, memds):
    base = dict(tasks=("type3",), classifiers=("lda",), fractions=(1.0,), out=str(tmp_path))
    a = run_experiments(ExperimentConfig(**base), dataset=memds)
    b = run_experiments(ExperimentConfig(seed=1, **base), dataset=memds)
    assert not b.manifest["cells"][0]["cached"]
    assert a.bundle_hash != b.bundle_hash


def test_failed_cell_recorded(tmp_path):
    # negative features make every MultinomialNB cell fail while LDA still runs
    ds, _ = blobs_dataset(SynthSpec(150, 5, 3, 4, 5.0, 0))
    cfg = ExperimentConfig(tasks=("type3",), classifiers=("mnb", "lda"), fractions=(0.5, 1.0),
                           chi2_min_shift=True, out=str(tmp_path))
    bundle = run_experiments(cfg, dataset=ds)
    failed = bundle.failures()
    assert {c["classifier"] for c in failed} == {"mnb"}
    assert "nonnegative" in failed[0]["error"]
    table = render_table(bundle, "type3")
    mnb = [ln for ln in table.splitlines() if ln.startswith("MNB")][0]
    assert MISSING in mnb
    assert any("confusion skipped" in n for n in load_bundle(tmp_path).manifest["notes"])


def test_table_cells_match_reports(tmp_path, memds):
    cfg = ExperimentConfig(tasks=("type3",), classifiers=("lda", "knn", "mnb"), out=str(tmp_path))
    bundle = run_experiments(cfg, dataset=memds)
    rows = render_table(bundle, "type3", "csv").splitlines()
    header = rows[0].split(",")
    assert header[:3] == ["classifier", "100% F1", "100% Acc"]
    assert len(rows) == 4
    for line, clf in zip(rows[1:], ("lda", "knn", "mnb")):
        vals = line.split(",")
        for j, (method, frac) in enumerate(settings(cfg.fractions, cfg.methods)):
            rep = bundle.reports[Cell("type3", clf, method, frac)]
            assert vals[1 + 2 * j].rstrip("*") == f"{rep.macro_f1_mean:.2f}"
            assert vals[2 + 2 * j] == f"{rep.accuracy_mean:.2f}"
    # at least one best flag in every fraction group, and only on the group's top value
    groups = {}
    for j, (method, frac) in enumerate(settings(cfg.fractions, cfg.methods)):
        groups.setdefault(frac, []).extend(r.split(",")[1 + 2 * j] for r in rows[1:])
    for vals in groups.values():
        top = max(float(v.rstrip("*")) for v in vals)
        assert any(v.endswith("*") for v in vals)
        assert all(float(v.rstrip("*")) == top for v in vals if v.endswith("*"))


def test_confusions_partition_rows(tmp_path, memds):
    cfg = ExperimentConfig(tasks=("family5:Trojan",), classifiers=("lda",), methods=("mi",), out=str(tmp_path))
    bundle = run_experiments(cfg, dataset=memds)
    paths = emit_confusions(bundle, "family5:Trojan", "lda")
    assert len(paths) == 3
    for p in paths:
        lines = p.read_text().splitlines()
        assert len(lines) == 6
        total = sum(int(v) for ln in lines[1:] for v in ln.split(",")[1:])
        assert total == 60


def test_empty_bundle_notes(tmp_path):
    (tmp_path / "manifest.json").write_text(json.dumps({"config": {"fractions": [1.0]}, "cells": []}))
    bundle = load_bundle(tmp_path)
    assert emit_confusions(bundle, "binary", "rf", out=tmp_path / "conf") == []
    assert not (tmp_path / "conf").exists()
    assert bundle.manifest["notes"]
    assert load_bundle(tmp_path).manifest["notes"] == bundle.manifest["notes"]


def test_workers_env(tmp_path, memds, monkeypatch):
    monkeypatch.setenv("MEMSEL_WORKERS", "2")
    cfg = ExperimentConfig(tasks=("type3",), classifiers=("lda", "knn"), fractions=(1.0,), out=str(tmp_path / "a"))
    par = run_experiments(cfg, dataset=memds)
    monkeypatch.setenv("MEMSEL_WORKERS", "1")
    cfg2 = ExperimentConfig(tasks=("type3",), classifiers=("lda", "knn"), fractions=(1.0,), out=str(tmp_path / "b"))
    seq = run_experiments(cfg2, dataset=memds)
    assert par.bundle_hash == seq.bundle_hash


def test_chi2_negative_needs_min_shift(tmp_path):
    ds, _ = blobs_dataset(SynthSpec(150, 5, 3, 4, 5.0, 0))
    base = dict(tasks=("type3",), classifiers=("lda",), methods=("chi2",), fractions=(0.5,))
    plain = run_experiments(ExperimentConfig(out=str(tmp_path / "a"), **base), dataset=ds)
    assert [c["method"] for c in plain.failures()] == ["chi2"]
    shifted = run_experiments(ExperimentConfig(chi2_min_shift=True, out=str(tmp_path / "b"), **base), dataset=ds)
    assert not shifted.failures()
    assert shifted.reports[Cell("type3", "lda", "chi2", 0.5)].provenance["selection"]["params"] == {"min_shift": True}
