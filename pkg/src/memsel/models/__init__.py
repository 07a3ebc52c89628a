"""The six classifiers behind one train/predict contract.

>>> spec = ClassifierSpec("rf", seed=1)
>>> spec.hyperparams["n_estimators"]
100
"""
from __future__ import annotations

import json
import os

import numpy as np

from .base import ALGORITHMS, DEFAULT_HYPERPARAMS, DISPLAY_NAMES, ClassifierSpec, TrainedModel
from .boosting import AdaBoostModel, fit_adaboost
from .forest import ForestModel, fit_forest
from .knn import KNNModel, fit_knn
from .linear import GaussianNBModel, LinearScoreModel, fit_gnb, fit_lda, fit_mnb

__all__ = [
    "ALGORITHMS",
    "DEFAULT_HYPERPARAMS",
    "DISPLAY_NAMES",
    "DEFAULT_CLASSIFIERS",
    "ClassifierSpec",
    "TrainedModel",
    "train",
    "predict",
    "predict_proba",
    "save_model",
    "load_model",
]

# The six classifiers in table row order.
DEFAULT_CLASSIFIERS = ("mnb", "lda", "adaboost", "knn", "extratrees", "rf")

MODEL_FORMAT = "memsel-model"
MODEL_FORMAT_VERSION = 1

_STATE_CLASSES = {
    "rf": ForestModel,
    "extratrees": ForestModel,
    "knn": KNNModel,
    "adaboost": AdaBoostModel,
    "lda": LinearScoreModel,
    "mnb": LinearScoreModel,
    "gnb": GaussianNBModel,
}


def train(spec: ClassifierSpec | str, X, y, n_classes: int | None = None) -> TrainedModel:
    """Fit ``spec`` on ``X`` (rows x features) and integer class ids ``y``.

    Deterministic given ``(spec.seed, X, y)``. ``n_classes`` defaults to
    ``max(y) + 1``.
    """
    if isinstance(spec, str):
        spec = ClassifierSpec(spec)
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.asarray(y)
    if X.ndim != 2:
        raise ValueError("X must be 2-D")
    if y.shape != (X.shape[0],):
        raise ValueError(f"y has shape {y.shape}, expected ({X.shape[0]},)")
    if not np.isfinite(X).all():
        raise ValueError("X contains non-finite values")
    y = y.astype(np.int64)
    if y.size and y.min() < 0:
        raise ValueError("class ids must be nonnegative")
    n_classes = int(y.max()) + 1 if n_classes is None else int(n_classes)
    if np.unique(y).size < 2:
        raise ValueError("training labels must contain at least two classes")
    if y.max() >= n_classes:
        raise ValueError("class id out of range")

    algo = spec.algorithm
    if algo == "rf":
        return fit_forest(spec, X, y, n_classes, bootstrap=bool(spec.hyperparams["bootstrap"]), random_splits=False)
    if algo == "extratrees":
        return fit_forest(spec, X, y, n_classes, bootstrap=bool(spec.hyperparams["bootstrap"]), random_splits=True)
    if algo == "knn":
        return fit_knn(spec, X, y, n_classes)
    if algo == "adaboost":
        return fit_adaboost(spec, X, y, n_classes)
    if algo == "lda":
        return fit_lda(spec, X, y, n_classes)
    if algo == "mnb":
        return fit_mnb(spec, X, y, n_classes)
    return fit_gnb(spec, X, y, n_classes)


def predict(model: TrainedModel, X) -> np.ndarray:
    return model.predict(X)


def predict_proba(model: TrainedModel, X) -> np.ndarray:
    return model.predict_proba(X)


def save_model(model: TrainedModel, path, extra: dict | None = None) -> None:
    """Write ``model`` as an ``.npz`` container.

    The archive holds a ``__meta__`` JSON document (format tag, version,
    classifier spec, class/feature counts and any ``extra`` metadata) next to
    the model's state arrays.
    """
    meta = {
        "format": MODEL_FORMAT,
        "version": MODEL_FORMAT_VERSION,
        "spec": model.spec.to_dict(),
        "spec_string": model.spec.canonical(),
        "n_classes": model.n_classes,
        "n_features_in": model.n_features_in,
        "extra": extra or {},
    }
    arrays = {f"state_{k}": np.asarray(v) for k, v in model.state().items()}
    tmp = f"{path}.tmp{os.getpid()}.npz"
    np.savez_compressed(tmp, __meta__=np.array(json.dumps(meta, sort_keys=True)), **arrays)
    os.replace(tmp, path)


def load_model(path) -> tuple[TrainedModel, dict]:
    """Inverse of :func:`save_model`; returns ``(model, extra_metadata)``."""
    with np.load(path, allow_pickle=False) as z:
        meta = json.loads(str(z["__meta__"]))
        if meta.get("format") != MODEL_FORMAT:
            raise ValueError(f"{path} is not a {MODEL_FORMAT} file")
        if meta.get("version") != MODEL_FORMAT_VERSION:
            raise ValueError(f"unsupported model format version {meta.get('version')}")
        state = {k[len("state_"):]: z[k] for k in z.files if k.startswith("state_")}
    spec = ClassifierSpec.from_dict(meta["spec"])
    cls = _STATE_CLASSES[spec.algorithm]
    model = cls.from_state(spec.algorithm, spec, meta["n_classes"], meta["n_features_in"], state)
    return model, meta.get("extra", {})
