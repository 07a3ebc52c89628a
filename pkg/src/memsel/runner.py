"""Experiment grid: task x classifier x selection method x fraction.

Each grid cell is a cross-validated :class:`~memsel.evalkit.EvaluationReport`
written to ``<out>/cells/<task>/<classifier>__<method>__<pct>.json``. A cell
whose file already carries the same content key is not recomputed, so an
interrupted grid resumes where it stopped. Layout of ``<out>``::

    manifest.json                       config, hashes, per-cell status, notes
    cells/<task>/<cell>.json            report (deterministic)
    cells/<task>/<cell>.timing.json     wall-clock seconds per fold
    tables/<task>.txt, tables/<task>.csv
    confusions/<task>/<cell>.csv        pooled cross-fold confusion matrix
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import os
import time
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Iterable

import numpy as np

from . import __version__
from .dataset import LabeledDataset, Schema, Task, load_csv, make_task_view
from .evalkit import EvaluationReport, Selection, cross_validate
from .models import DISPLAY_NAMES, DEFAULT_CLASSIFIERS, ClassifierSpec

log = logging.getLogger(__name__)

METHOD_LABELS = {"chi2": "Chi", "anova": "ANOVA", "mi": "MI", "none": ""}
METHOD_ORDER = ("chi2", "anova", "mi")
WORKERS_ENV = "MEMSEL_WORKERS"
MISSING = "—"


@dataclass(frozen=True)
class ExperimentConfig:
    data: str | None = None
    schema: Schema = field(default_factory=Schema)
    tasks: tuple[str, ...] = ("binary", "type3", "family5:Trojan", "family5:Spyware", "family5:Ransomware")
    classifiers: tuple[str, ...] = DEFAULT_CLASSIFIERS
    methods: tuple[str, ...] = METHOD_ORDER
    fractions: tuple[float, ...] = (0.25, 0.5, 1.0)
    k: int = 5
    seed: int = 0
    mode: str = "perfold"
    chi2_min_shift: bool = False
    out: str = "results"
    workers: int | None = None

    def __post_init__(self):
        if not self.tasks:
            raise ValueError("at least one task is required")
        if not self.classifiers:
            raise ValueError("at least one classifier is required")
        for f in self.fractions:
            if not 0 < f <= 1:
                raise ValueError(f"fraction {f} outside (0, 1]")
        for m in self.methods:
            if m not in METHOD_ORDER:
                raise ValueError(f"unknown selection method {m!r}")
        if self.mode not in ("perfold", "global"):
            raise ValueError(f"unknown selection mode {self.mode!r}")
        for t in self.tasks:
            Task.parse(t)
        for c in self.classifiers:
            ClassifierSpec(c)

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["schema"] = {k: (dict(v) if k == "aliases" else v) for k, v in asdict(self.schema).items()}
        d["tasks"] = [str(Task.parse(t)) for t in self.tasks]
        d["classifiers"] = [ClassifierSpec(c).algorithm for c in self.classifiers]
        return d

    def hash(self) -> str:
        d = self.to_dict()
        for k in ("out", "workers", "data"):
            d.pop(k)
        return _sha(d)


@dataclass(frozen=True)
class Cell:
    task: str
    classifier: str
    method: str
    fraction: float

    @property
    def name(self) -> str:
        return f"{self.classifier}__{self.method}__{fraction_label(self.fraction).rstrip('%')}"

    @property
    def task_slug(self) -> str:
        return Task.parse(self.task).slug


def fraction_label(f: float) -> str:
    pct = f * 100
    return f"{pct:g}%"


def _sha(obj) -> str:
    return hashlib.sha256(json.dumps(obj, sort_keys=True, separators=(",", ":")).encode()).hexdigest()


def settings(fractions: Iterable[float], methods: Iterable[str]) -> list[tuple[str, float]]:
    """Column settings: ``('none', 1.0)`` for the full feature set, then methods per fraction."""
    out = []
    fr = sorted(set(float(f) for f in fractions))
    if 1.0 in fr:
        out.append(("none", 1.0))
    for f in fr:
        if f < 1.0:
            out.extend((m, f) for m in METHOD_ORDER if m in methods)
    return out


def grid_cells(cfg: ExperimentConfig) -> list[Cell]:
    cells = []
    for t in cfg.tasks:
        for c in cfg.classifiers:
            for method, frac in settings(cfg.fractions, cfg.methods):
                cells.append(Cell(str(Task.parse(t)), ClassifierSpec(c).algorithm, method, frac))
    return cells


def cell_key(cfg: ExperimentConfig, cell: Cell, dataset_hash: str) -> str:
    return _sha(
        {
            "cell": asdict(cell),
            "classifier_spec": ClassifierSpec(cell.classifier, seed=cfg.seed).canonical(),
            "k": cfg.k,
            "seed": cfg.seed,
            "mode": cfg.mode,
            "selection_params": _selection_params(cfg, cell.method),
            "schema": cfg.to_dict()["schema"],
            "dataset_hash": dataset_hash,
            "version": __version__,
        }
    )


def atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(f".{path.name}.{os.getpid()}.tmp")
    with open(tmp, "w", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _selection_params(cfg: ExperimentConfig, method: str) -> dict[str, Any]:
    return {"min_shift": True} if method == "chi2" and cfg.chi2_min_shift else {}


def _run_cell(view, cell: Cell, cfg: ExperimentConfig, key: str):
    spec = ClassifierSpec(cell.classifier, seed=cfg.seed)
    selection = None
    if cell.method != "none":
        selection = Selection(cell.method, cell.fraction, _selection_params(cfg, cell.method))
    t0 = time.perf_counter()
    report = cross_validate(view, spec, selection, k=cfg.k, seed=cfg.seed, mode=cfg.mode)
    elapsed = time.perf_counter() - t0
    payload = report.to_dict()
    payload["cell_key"] = key
    payload["cell"] = asdict(cell)
    timing = {"cell_key": key, "total_seconds": elapsed, "folds": [f.seconds for f in report.folds]}
    return payload, timing


@dataclass
class Bundle:
    """On-disk results of a grid run."""

    out: Path
    manifest: dict[str, Any]
    reports: dict[Cell, EvaluationReport]

    @property
    def bundle_hash(self) -> str:
        return self.manifest.get("bundle_hash", "")

    def failures(self) -> list[dict]:
        return [c for c in self.manifest.get("cells", []) if c["status"] == "failed"]

    def tasks(self) -> list[str]:
        return list(dict.fromkeys(c.task for c in self.reports))

    def add_note(self, note: str) -> None:
        notes = self.manifest.setdefault("notes", [])
        if note not in notes:
            notes.append(note)
            _write_manifest(self.out, self.manifest)


def _write_manifest(out: Path, manifest: dict) -> None:
    atomic_write(out / "manifest.json", json.dumps(manifest, sort_keys=True, indent=1) + "\n")


def _cell_path(out: Path, cell: Cell) -> Path:
    return out / "cells" / cell.task_slug / f"{cell.name}.json"


def load_bundle(out) -> Bundle:
    out = Path(out)
    manifest_path = out / "manifest.json"
    if not manifest_path.is_file():
        raise FileNotFoundError(f"no manifest in {out}")
    manifest = json.loads(manifest_path.read_text())
    reports = {}
    for entry in manifest.get("cells", []):
        if entry["status"] != "ok":
            continue
        cell = Cell(entry["task"], entry["classifier"], entry["method"], float(entry["fraction"]))
        path = out / entry["file"]
        if path.is_file():
            reports[cell] = EvaluationReport.from_dict(json.loads(path.read_text()))
    return Bundle(out, manifest, reports)


def run_experiments(cfg: ExperimentConfig, dataset: LabeledDataset | None = None) -> Bundle:
    """Run every grid cell not already cached and write the bundle.

    A failing cell is recorded in the manifest with its traceback; the other
    cells still run. ``dataset`` overrides loading ``cfg.data``.
    """
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    ds = dataset if dataset is not None else load_csv(cfg.data, cfg.schema)
    cells = grid_cells(cfg)
    keys = {cell: cell_key(cfg, cell, ds.source_hash) for cell in cells}

    views, view_errors = {}, {}
    for t in dict.fromkeys(c.task for c in cells):
        try:
            views[t] = make_task_view(ds, t)
        except Exception as exc:
            view_errors[t] = f"{type(exc).__name__}: {exc}"

    entries: dict[Cell, dict] = {}
    todo = []
    for cell in cells:
        path = _cell_path(out, cell)
        entry = {**asdict(cell), "key": keys[cell], "file": str(path.relative_to(out))}
        if cell.task in view_errors:
            entries[cell] = {**entry, "status": "failed", "error": view_errors[cell.task]}
            continue
        if path.is_file():
            try:
                cached = json.loads(path.read_text())
            except json.JSONDecodeError:
                cached = {}
            if cached.get("cell_key") == keys[cell]:
                entries[cell] = {**entry, "status": "ok", "cached": True,
                                 "report_sha256": _report_sha(cached)}
                continue
        todo.append(cell)

    workers = cfg.workers or int(os.environ.get(WORKERS_ENV, "1") or 1)
    log.info("grid: %d cells, %d cached, %d to run, %d worker(s)", len(cells), len(cells) - len(todo), len(todo), workers)

    def finish(cell, result=None, error=None):
        path = _cell_path(out, cell)
        entry = {**asdict(cell), "key": keys[cell], "file": str(path.relative_to(out))}
        if error is not None:
            entries[cell] = {**entry, "status": "failed", "error": error}
            log.warning("cell %s/%s failed: %s", cell.task, cell.name, error.splitlines()[-1])
            return
        payload, timing = result
        atomic_write(path, json.dumps(payload, sort_keys=True, indent=1) + "\n")
        atomic_write(path.with_suffix(".timing.json"), json.dumps(timing, sort_keys=True, indent=1) + "\n")
        entries[cell] = {**entry, "status": "ok", "cached": False, "report_sha256": _report_sha(payload)}

    if workers > 1 and len(todo) > 1:
        with ProcessPoolExecutor(workers) as pool:
            futures = {cell: pool.submit(_run_cell, views[cell.task], cell, cfg, keys[cell]) for cell in todo}
            for cell, fut in futures.items():
                try:
                    finish(cell, fut.result())
                except Exception:
                    finish(cell, error=traceback.format_exc())
    else:
        for cell in todo:
            try:
                finish(cell, _run_cell(views[cell.task], cell, cfg, keys[cell]))
            except Exception:
                finish(cell, error=traceback.format_exc())

    ordered = [entries[c] for c in cells]
    config_hash = cfg.hash()
    manifest = {
        "format": "memsel-bundle",
        "version": __version__,
        "config": cfg.to_dict(),
        "config_hash": config_hash,
        "dataset_hash": ds.source_hash,
        "dataset": {"n_rows": ds.n_rows, "n_features": ds.n_features},
        "cells": ordered,
        "notes": [],
    }
    manifest["bundle_hash"] = _sha(
        {
            "config_hash": config_hash,
            "dataset_hash": ds.source_hash,
            "version": __version__,
            "cells": [[e["key"], e["status"], e.get("report_sha256")] for e in ordered],
        }
    )
    _write_manifest(out, manifest)
    bundle = load_bundle(out)

    for task in dict.fromkeys(c.task for c in cells):
        if task in view_errors:
            continue
        atomic_write(out / "tables" / f"{Task.parse(task).slug}.txt", render_table(bundle, task, "text"))
        atomic_write(out / "tables" / f"{Task.parse(task).slug}.csv", render_table(bundle, task, "csv"))
        for clf in dict.fromkeys(c.classifier for c in cells):
            emit_confusions(bundle, task, clf)
    return bundle


def _report_sha(payload: dict) -> str:
    return _sha(payload)


def _bundle_settings(bundle: Bundle) -> list[tuple[str, float]]:
    cfg = bundle.manifest.get("config", {})
    return settings(cfg.get("fractions", (1.0,)), cfg.get("methods", METHOD_ORDER))


def render_table(bundle: Bundle, task: str, fmt: str = "text", aggregate: str = "mean") -> str:
    """Classifier x setting table of macro F1 and accuracy.

    Columns are grouped by fraction (100% first), with one sub-column per
    selection method. Values are rounded to 2 decimals; ``*`` marks the best
    F1 within each fraction group. Cells without a report show ``—``.
    """
    task = str(Task.parse(task))
    cols = _bundle_settings(bundle)
    cfg_clfs = bundle.manifest.get("config", {}).get("classifiers")
    classifiers = [c for c in (cfg_clfs or dict.fromkeys(c.classifier for c in bundle.reports))]
    scores: dict[tuple[str, tuple[str, float]], tuple[float, float]] = {}
    for clf in classifiers:
        for col in cols:
            rep = bundle.reports.get(Cell(task, clf, col[0], col[1]))
            if rep is not None:
                scores[clf, col] = rep.score(aggregate)
    # best is judged on the displayed (rounded) value, so equal-looking cells share the flag
    best: dict[float, float] = {}
    for (clf, col), (f1, _) in scores.items():
        best[col[1]] = max(best.get(col[1], -1.0), round(f1, 2))

    def cell_text(clf, col):
        if (clf, col) not in scores:
            return MISSING, MISSING
        f1, acc = scores[clf, col]
        flag = "*" if round(f1, 2) == best[col[1]] else ""
        return f"{f1:.2f}{flag}", f"{acc:.2f}"

    group_names = [fraction_label(c[1]) for c in cols]
    method_names = [METHOD_LABELS[c[0]] for c in cols]
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        head = ["classifier"]
        for g, m in zip(group_names, method_names):
            prefix = f"{g} {m}".strip()
            head += [f"{prefix} F1", f"{prefix} Acc"]
        w.writerow(head)
        for clf in classifiers:
            row = [DISPLAY_NAMES.get(clf, clf)]
            for col in cols:
                row += list(cell_text(clf, col))
            w.writerow(row)
        return buf.getvalue()
    if fmt != "text":
        raise ValueError(f"unknown table format {fmt!r}")

    rows = [["Classifier"] + [f"{g} {m}".strip() for g, m in zip(group_names, method_names)]]
    rows.append([""] + ["F1 / Acc"] * len(cols))
    for clf in classifiers:
        rows.append([DISPLAY_NAMES.get(clf, clf)] + [" / ".join(cell_text(clf, col)) for col in cols])
    widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
    lines = [f"Task: {task}   (macro F1 / accuracy, {aggregate} over folds; * best F1 per fraction)"]
    for i, r in enumerate(rows):
        lines.append(" | ".join(v.ljust(w) for v, w in zip(r, widths)).rstrip())
        if i == 1:
            lines.append("-+-".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


def confusion_csv(cm: np.ndarray, class_names) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["true\\predicted"] + list(class_names))
    for name, row in zip(class_names, cm):
        w.writerow([name] + [int(v) for v in row])
    return buf.getvalue()


def emit_confusions(bundle: Bundle, task: str, classifier: str, out: Path | None = None) -> list[Path]:
    """Write the pooled confusion matrix of every (method, fraction) cell of ``task`` x ``classifier``.

    Missing cells are skipped and noted in the manifest.
    """
    task = str(Task.parse(task))
    classifier = ClassifierSpec(classifier).algorithm
    out = Path(out) if out is not None else bundle.out / "confusions"
    written = []
    for method, frac in _bundle_settings(bundle):
        cell = Cell(task, classifier, method, frac)
        rep = bundle.reports.get(cell)
        if rep is None:
            bundle.add_note(f"confusion skipped: no report for {task} {classifier} {method} {fraction_label(frac)}")
            continue
        path = out / cell.task_slug / f"{cell.name}.csv"
        atomic_write(path, confusion_csv(rep.pooled_confusion, rep.class_names))
        written.append(path)
    if not bundle.reports:
        bundle.add_note("confusion skipped: bundle holds no reports")
    return written
