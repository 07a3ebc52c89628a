"""Random forest and extremely randomized trees over the compiled CART kernel."""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from ._tree import apply_tree, build_tree
from .base import TrainedModel


def resolve_max_features(max_features, n_features: int) -> int:
    if max_features is None:
        return n_features
    if max_features == "sqrt":
        return max(1, math.ceil(math.sqrt(n_features)))
    if max_features == "log2":
        return max(1, math.ceil(math.log2(n_features)))
    if isinstance(max_features, float):
        return max(1, min(n_features, math.ceil(max_features * n_features)))
    return max(1, min(n_features, int(max_features)))


def _tree_seed(seed: int, tree: int) -> tuple[int, np.random.Generator]:
    ss = np.random.SeedSequence([int(seed), int(tree)])
    kernel_seed = int(ss.generate_state(1)[0] & 0x7FFFFFFF)
    return kernel_seed, np.random.default_rng(ss)


class ForestModel(TrainedModel):
    """Majority vote over unpruned Gini trees.

    ``predict_proba`` is the fraction of trees voting for each class.
    """

    def __init__(self, algorithm, spec, n_classes, n_features_in, trees):
        super().__init__(algorithm, spec, n_classes, n_features_in)
        self.trees = trees

    def _votes(self, X):
        votes = np.zeros((X.shape[0], self.n_classes))
        rows = np.arange(X.shape[0])
        for t in self.trees:
            votes[rows, apply_tree(X, *t)] += 1.0
        return votes

    def _predict_proba(self, X):
        return self._votes(X) / len(self.trees)

    def _predict(self, X):
        return np.argmax(self._votes(X), axis=1)

    def state(self):
        sizes = np.array([len(t[0]) for t in self.trees], dtype=np.int64)
        cat = [np.concatenate([t[i] for t in self.trees]) for i in range(5)]
        return {
            "tree_sizes": sizes,
            "feature": cat[0],
            "threshold": cat[1],
            "left": cat[2],
            "right": cat[3],
            "value": cat[4],
        }

    @classmethod
    def from_state(cls, algorithm, spec, n_classes, n_features_in, state):
        bounds = np.concatenate([[0], np.cumsum(state["tree_sizes"])])
        trees = []
        for a, b in zip(bounds[:-1], bounds[1:]):
            trees.append(tuple(np.ascontiguousarray(state[k][a:b]) for k in
                               ("feature", "threshold", "left", "right", "value")))
        return cls(algorithm, spec, n_classes, n_features_in, trees)


def fit_forest(spec, X, y, n_classes, *, bootstrap: bool, random_splits: bool) -> ForestModel:
    hp = spec.hyperparams
    n, d = X.shape
    mtry = resolve_max_features(hp["max_features"], d)
    max_depth = -1 if hp["max_depth"] is None else int(hp["max_depth"])
    X = np.asfortranarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.int64)

    def grow(t):
        kseed, rng = _tree_seed(spec.seed, t)
        if bootstrap:
            sample = rng.integers(0, n, size=n).astype(np.int64)
        else:
            sample = np.arange(n, dtype=np.int64)
        return build_tree(X, y, sample, n_classes, mtry, random_splits, kseed,
                          int(hp["min_samples_split"]), max_depth)

    n_trees = int(hp["n_estimators"])
    n_jobs = int(os.environ.get("MEMSEL_TREE_THREADS", "1"))
    if n_jobs > 1:
        # per-tree seeds make the result independent of scheduling
        with ThreadPoolExecutor(n_jobs) as pool:
            trees = list(pool.map(grow, range(n_trees)))
    else:
        trees = [grow(t) for t in range(n_trees)]
    return ForestModel(spec.algorithm, spec, n_classes, d, trees)
