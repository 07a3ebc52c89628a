from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any

import numpy as np

ALGORITHMS = ("mnb", "lda", "adaboost", "knn", "extratrees", "rf", "gnb")

# Display names used in tables, in the row order of the published tables.
DISPLAY_NAMES = {
    "mnb": "MNB",
    "lda": "LDA",
    "adaboost": "Adaboost",
    "knn": "K-NN",
    "extratrees": "Extra-Tree",
    "rf": "Random Forest",
    "gnb": "GNB",
}

DEFAULT_HYPERPARAMS: dict[str, dict[str, Any]] = {
    "rf": {
        "n_estimators": 100,
        "criterion": "gini",
        "max_features": "sqrt",
        "bootstrap": True,
        "max_depth": None,
        "min_samples_split": 2,
    },
    "extratrees": {
        "n_estimators": 100,
        "criterion": "gini",
        "max_features": "sqrt",
        "bootstrap": False,
        "max_depth": None,
        "min_samples_split": 2,
    },
    "knn": {"n_neighbors": 5, "metric": "euclidean", "weights": "uniform"},
    "adaboost": {"n_estimators": 50, "learning_rate": 1.0, "algorithm": "SAMME", "base": "stump-gini"},
    "lda": {"reg": 1e-9},
    "mnb": {"alpha": 1.0},
    "gnb": {"var_smoothing": 1e-9},
}

ALIASES = {
    "randomforest": "rf",
    "random_forest": "rf",
    "et": "extratrees",
    "extra_trees": "extratrees",
    "extratree": "extratrees",
    "multinomialnb": "mnb",
    "gaussiannb": "gnb",
    "k-nn": "knn",
}


@dataclass(frozen=True)
class ClassifierSpec:
    """Algorithm tag, fully pinned hyperparameters and seed.

    Hyperparameters not given explicitly take the values in
    :data:`DEFAULT_HYPERPARAMS`.
    """

    algorithm: str
    hyperparams: dict[str, Any] = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        algo = ALIASES.get(self.algorithm.lower(), self.algorithm.lower())
        if algo not in DEFAULT_HYPERPARAMS:
            raise ValueError(f"unknown classifier {self.algorithm!r}; expected one of {ALGORITHMS}")
        unknown = set(self.hyperparams) - set(DEFAULT_HYPERPARAMS[algo])
        if unknown:
            raise ValueError(f"unknown hyperparameter(s) for {algo}: {sorted(unknown)}")
        hp = dict(DEFAULT_HYPERPARAMS[algo])
        hp.update(self.hyperparams)
        object.__setattr__(self, "algorithm", algo)
        object.__setattr__(self, "hyperparams", hp)
        object.__setattr__(self, "seed", int(self.seed))

    def __hash__(self):
        return hash(self.canonical())

    def canonical(self) -> str:
        """Canonical string, e.g. ``knn(metric=euclidean,n_neighbors=5,weights=uniform);seed=0``."""
        body = ",".join(f"{k}={_fmt(v)}" for k, v in sorted(self.hyperparams.items()))
        return f"{self.algorithm}({body});seed={self.seed}"

    def to_dict(self) -> dict[str, Any]:
        return {"algorithm": self.algorithm, "hyperparams": dict(self.hyperparams), "seed": self.seed}

    @classmethod
    def from_dict(cls, d) -> "ClassifierSpec":
        return cls(d["algorithm"], dict(d.get("hyperparams", {})), int(d.get("seed", 0)))


def _fmt(v) -> str:
    if v is None:
        return "none"
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, float):
        return repr(v)
    return json.dumps(v) if not isinstance(v, (int, str)) else str(v)


class TrainedModel:
    """Fitted classifier with a uniform predict contract.

    Subclasses implement ``_predict`` and, where supported, ``_predict_proba``
    on already validated input, plus ``state``/``from_state`` for
    serialization.
    """

    supports_proba = True

    def __init__(self, algorithm: str, spec: ClassifierSpec, n_classes: int, n_features_in: int):
        self.algorithm = algorithm
        self.spec = spec
        self.n_classes = int(n_classes)
        self.n_features_in = int(n_features_in)

    def _check(self, X):
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.n_features_in:
            raise ValueError(f"expected a matrix with {self.n_features_in} columns, got shape {X.shape}")
        return np.ascontiguousarray(X)

    def predict(self, X) -> np.ndarray:
        X = self._check(X)
        if X.shape[0] == 0:
            return np.empty(0, dtype=np.int64)
        return np.asarray(self._predict(X), dtype=np.int64)

    def predict_proba(self, X) -> np.ndarray:
        X = self._check(X)
        if not self.supports_proba:
            raise NotImplementedError(f"{self.algorithm} does not provide probabilities")
        if X.shape[0] == 0:
            return np.empty((0, self.n_classes))
        return self._predict_proba(X)

    def _predict(self, X):
        return np.argmax(self._predict_proba(X), axis=1)

    def _predict_proba(self, X):
        raise NotImplementedError

    def state(self) -> dict[str, np.ndarray]:
        raise NotImplementedError

    @classmethod
    def from_state(cls, algorithm, spec, n_classes, n_features_in, state):
        raise NotImplementedError

    def __repr__(self):
        return f"<{type(self).__name__} {self.spec.canonical()} classes={self.n_classes} d={self.n_features_in}>"


def softmax_rows(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)
