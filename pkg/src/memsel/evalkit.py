"""Stratified k-fold cross-validation, macro F1 and confusion matrices."""
from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from . import __version__
from .dataset import TaskView
from .featsel import rank_and_select, score_features
from .models import ClassifierSpec, train

# Per-class F1 when precision and recall are both undefined (no true and no predicted rows).
ZERO_DIVISION_F1 = 0.0


class FoldError(RuntimeError):
    """A component failed inside one cross-validation fold."""

    def __init__(self, fold: int, cause: Exception):
        super().__init__(f"fold {fold}: {type(cause).__name__}: {cause}")
        self.fold = fold
        self.cause = cause


@dataclass(frozen=True, eq=False)
class FoldPlan:
    k: int
    assignments: np.ndarray
    seed: int

    def test_rows(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignments == fold)

    def train_rows(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignments != fold)


def stratified_folds(labels, k: int = 5, seed: int = 0) -> FoldPlan:
    """Assign rows to ``k`` folds class by class.

    Within each class (ascending id) rows are shuffled with a generator keyed
    by ``(seed, class id)`` and dealt round-robin. The dealing position carries
    over from one class to the next, which keeps overall fold sizes level.

    ``labels`` may be a :class:`TaskView` or an array of class ids.
    """
    y = labels.labels if isinstance(labels, TaskView) else np.asarray(labels)
    if k < 2:
        raise ValueError("cross-validation needs k >= 2")
    classes, counts = np.unique(y, return_counts=True)
    if (counts < k).any():
        small = {int(c): int(n) for c, n in zip(classes, counts) if n < k}
        raise ValueError(f"every class needs at least k={k} rows; too small: {small}")
    assignments = np.empty(len(y), dtype=np.int64)
    pos = 0
    for c in classes:
        rows = np.flatnonzero(y == c)
        rows = rows[np.random.default_rng([int(seed), int(c)]).permutation(len(rows))]
        assignments[rows] = (pos + np.arange(len(rows))) % k
        pos = (pos + len(rows)) % k
    return FoldPlan(int(k), assignments, int(seed))


def confusion(y_true, y_pred, n_classes: int) -> np.ndarray:
    """Counts with rows = true class, columns = predicted class."""
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    if y_true.shape != y_pred.shape:
        raise ValueError(f"length mismatch: {y_true.shape} vs {y_pred.shape}")
    cm = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(cm, (y_true, y_pred), 1)
    return cm


def per_class_f1(cm: np.ndarray) -> np.ndarray:
    tp = np.diag(cm).astype(np.float64)
    denom = cm.sum(axis=0) + cm.sum(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        f1 = np.where(denom > 0, 2 * tp / denom, ZERO_DIVISION_F1)
    return f1


def macro_f1(y_true, y_pred, n_classes: int) -> float:
    """Unweighted mean of per-class F1 over all ``n_classes`` classes.

    >>> round(macro_f1([0, 0, 1, 1], [0, 1, 1, 1], 2), 4)
    0.7333
    """
    return float(per_class_f1(confusion(y_true, y_pred, n_classes)).mean())


def accuracy_from_confusion(cm: np.ndarray) -> float:
    total = cm.sum()
    return float(np.trace(cm) / total) if total else 0.0


@dataclass
class FoldResult:
    fold: int
    n_train: int
    n_test: int
    macro_f1: float
    accuracy: float
    confusion: np.ndarray
    selected: list[int] | None
    seconds: dict[str, float] = field(default_factory=dict)

    def to_dict(self, names=None) -> dict[str, Any]:
        d = {
            "fold": self.fold,
            "n_train": self.n_train,
            "n_test": self.n_test,
            "macro_f1": self.macro_f1,
            "accuracy": self.accuracy,
            "confusion": self.confusion.tolist(),
            "selected_indices": self.selected,
        }
        if names is not None and self.selected is not None:
            d["selected_features"] = [names[i] for i in self.selected]
        return d


@dataclass
class EvaluationReport:
    """Per-fold and aggregate results of one cross-validated pipeline.

    ``to_json(timings=False)`` is a deterministic function of the inputs;
    wall-clock timings are only included on request.
    """

    folds: list[FoldResult]
    class_names: tuple[str, ...]
    feature_names: tuple[str, ...]
    provenance: dict[str, Any]

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    def _stat(self, key, fn):
        return float(fn([getattr(f, key) for f in self.folds]))

    @property
    def macro_f1_mean(self) -> float:
        return self._stat("macro_f1", np.mean)

    @property
    def macro_f1_std(self) -> float:
        return self._stat("macro_f1", np.std)

    @property
    def accuracy_mean(self) -> float:
        return self._stat("accuracy", np.mean)

    @property
    def accuracy_std(self) -> float:
        return self._stat("accuracy", np.std)

    @property
    def pooled_confusion(self) -> np.ndarray:
        return np.sum([f.confusion for f in self.folds], axis=0)

    @property
    def pooled_macro_f1(self) -> float:
        return float(per_class_f1(self.pooled_confusion).mean())

    @property
    def pooled_accuracy(self) -> float:
        return accuracy_from_confusion(self.pooled_confusion)

    def score(self, aggregate: str = "mean") -> tuple[float, float]:
        """``(macro_f1, accuracy)`` as mean over folds or from pooled predictions."""
        if aggregate == "mean":
            return self.macro_f1_mean, self.accuracy_mean
        if aggregate == "pooled":
            return self.pooled_macro_f1, self.pooled_accuracy
        raise ValueError(f"unknown aggregate {aggregate!r}")

    def to_dict(self, timings: bool = False) -> dict[str, Any]:
        folds = []
        for f in self.folds:
            d = f.to_dict(self.feature_names)
            if timings:
                d["seconds"] = f.seconds
            folds.append(d)
        return {
            "provenance": self.provenance,
            "class_names": list(self.class_names),
            "folds": folds,
            "aggregate": {
                "macro_f1_mean": self.macro_f1_mean,
                "macro_f1_std": self.macro_f1_std,
                "accuracy_mean": self.accuracy_mean,
                "accuracy_std": self.accuracy_std,
            },
            "pooled": {
                "macro_f1": self.pooled_macro_f1,
                "accuracy": self.pooled_accuracy,
                "confusion": self.pooled_confusion.tolist(),
            },
        }

    def to_json(self, timings: bool = False) -> str:
        return json.dumps(self.to_dict(timings), sort_keys=True, indent=1)

    def sha256(self) -> str:
        return hashlib.sha256(self.to_json().encode()).hexdigest()

    @classmethod
    def from_dict(cls, d) -> "EvaluationReport":
        folds = [
            FoldResult(
                fold=f["fold"],
                n_train=f["n_train"],
                n_test=f["n_test"],
                macro_f1=f["macro_f1"],
                accuracy=f["accuracy"],
                confusion=np.asarray(f["confusion"], dtype=np.int64),
                selected=f["selected_indices"],
                seconds=f.get("seconds", {}),
            )
            for f in d["folds"]
        ]
        names = tuple(d["provenance"].get("feature_names", ()))
        return cls(folds, tuple(d["class_names"]), names, d["provenance"])


@dataclass(frozen=True)
class Selection:
    """Filter selection step: method in {chi2, anova, mi} and kept fraction."""

    method: str
    fraction: float
    params: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.method not in ("chi2", "anova", "mi"):
            raise ValueError(f"unknown selection method {self.method!r}")
        if not 0 < self.fraction <= 1:
            raise ValueError(f"fraction must lie in (0, 1], got {self.fraction}")


def default_selection_params(method: str, seed: int) -> dict[str, Any]:
    if method == "mi":
        return {"k": 3, "seed": int(seed)}
    return {}


def select_features(X, y, selection: Selection, seed: int = 0) -> np.ndarray:
    params = {**default_selection_params(selection.method, seed), **selection.params}
    scores = score_features(selection.method, X, y, **params)
    return rank_and_select(scores, selection.fraction).kept_indices


def cross_validate(
    view: TaskView,
    spec: ClassifierSpec,
    selection: Selection | None = None,
    k: int = 5,
    seed: int = 0,
    mode: str = "perfold",
) -> EvaluationReport:
    """Stratified k-fold evaluation of (optional filter selection) + classifier.

    In ``perfold`` mode features are scored and selected on each training
    partition only. ``global`` mode scores all rows of the view once before
    splitting; it leaks test rows into selection and is offered only to probe
    protocols that selected features up front.
    """
    if mode not in ("perfold", "global"):
        raise ValueError(f"mode must be 'perfold' or 'global', got {mode!r}")
    X, y = view.X, view.labels
    plan = stratified_folds(y, k, seed)
    global_kept = None
    if selection is not None and mode == "global":
        global_kept = select_features(X, y, selection, seed)

    folds = []
    for fold in range(k):
        tr, te = plan.train_rows(fold), plan.test_rows(fold)
        try:
            t0 = time.perf_counter()
            if selection is None:
                kept = None
                cols = slice(None)
            else:
                kept = global_kept if global_kept is not None else select_features(X[tr], y[tr], selection, seed)
                cols = kept
            t1 = time.perf_counter()
            model = train(spec, X[tr][:, cols], y[tr], n_classes=view.n_classes)
            t2 = time.perf_counter()
            pred = model.predict(X[te][:, cols])
            t3 = time.perf_counter()
        except Exception as exc:
            raise FoldError(fold, exc) from exc
        timing = {"select": t1 - t0, "train": t2 - t1, "predict": t3 - t2}
        cm = confusion(y[te], pred, view.n_classes)
        folds.append(
            FoldResult(
                fold=fold,
                n_train=len(tr),
                n_test=len(te),
                macro_f1=float(per_class_f1(cm).mean()),
                accuracy=accuracy_from_confusion(cm),
                confusion=cm,
                selected=None if kept is None else [int(i) for i in kept],
                seconds=timing,
            )
        )

    provenance = {
        "dataset_hash": view.source_hash,
        "task": str(view.task),
        "n_rows": int(view.n_rows),
        "class_counts": view.class_counts().tolist(),
        "feature_names": list(view.feature_names),
        "classifier": spec.canonical(),
        "classifier_spec": spec.to_dict(),
        "selection": None
        if selection is None
        else {
            "method": selection.method,
            "fraction": selection.fraction,
            "params": {**default_selection_params(selection.method, seed), **selection.params},
        },
        "selection_mode": mode if selection is not None else "none",
        "k": int(k),
        "seed": int(seed),
        "f1_zero_division": ZERO_DIVISION_F1,
        "version": __version__,
    }
    return EvaluationReport(folds, view.class_names, view.feature_names, provenance)
