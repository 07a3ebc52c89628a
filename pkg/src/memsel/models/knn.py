"""Brute-force k-nearest-neighbour classifier with deterministic tie handling."""
from __future__ import annotations

import numpy as np

from .base import TrainedModel

# Candidate pool drawn from the fast Gram-matrix distances before exact re-ranking.
_EXTRA_CANDIDATES = 8
_CHUNK = 1024


class KNNModel(TrainedModel):
    """Uniform-vote k-NN under Euclidean distance.

    Neighbours are ordered by (distance, training row). A tie in the vote
    goes to the lowest class id, so ``predict`` is the argmax of the vote
    fractions returned by ``predict_proba``.
    """

    def __init__(self, algorithm, spec, n_classes, n_features_in, X_train, y_train):
        super().__init__(algorithm, spec, n_classes, n_features_in)
        self.X_train = np.ascontiguousarray(X_train, dtype=np.float64)
        self.y_train = np.asarray(y_train, dtype=np.int64)
        self.k = int(spec.hyperparams["n_neighbors"])
        self._sq_train = np.einsum("ij,ij->i", self.X_train, self.X_train)

    def kneighbors(self, X):
        """Return ``(distances, indices)`` of the k nearest training rows, nearest first."""
        X = self._check(X)
        n_train = self.X_train.shape[0]
        m = min(n_train, self.k + _EXTRA_CANDIDATES)
        dist = np.empty((X.shape[0], self.k))
        ind = np.empty((X.shape[0], self.k), dtype=np.int64)
        for a in range(0, X.shape[0], _CHUNK):
            Q = X[a:a + _CHUNK]
            approx = self._sq_train[None, :] - 2.0 * Q @ self.X_train.T
            if m < n_train:
                cand = np.argpartition(approx, m - 1, axis=1)[:, :m]
            else:
                cand = np.broadcast_to(np.arange(n_train), (Q.shape[0], n_train))
            diff = self.X_train[cand] - Q[:, None, :]
            exact = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
            order = np.lexsort((cand, exact), axis=1)[:, :self.k]
            dist[a:a + _CHUNK] = np.take_along_axis(exact, order, axis=1)
            ind[a:a + _CHUNK] = np.take_along_axis(cand, order, axis=1)
        return dist, ind

    def _votes(self, ind):
        labels = self.y_train[ind]
        votes = np.zeros((ind.shape[0], self.n_classes))
        np.add.at(votes, (np.repeat(np.arange(ind.shape[0]), ind.shape[1]), labels.ravel()), 1.0)
        return votes

    def _predict_proba(self, X):
        _, ind = self.kneighbors(X)
        votes = self._votes(ind)
        return votes / self.k

    def _predict(self, X):
        _, ind = self.kneighbors(X)
        votes = self._votes(ind)
        return np.argmax(votes, axis=1)

    def state(self):
        return {"X_train": self.X_train, "y_train": self.y_train}

    @classmethod
    def from_state(cls, algorithm, spec, n_classes, n_features_in, state):
        return cls(algorithm, spec, n_classes, n_features_in, state["X_train"], state["y_train"])


def fit_knn(spec, X, y, n_classes):
    k = int(spec.hyperparams["n_neighbors"])
    if spec.hyperparams["metric"] != "euclidean" or spec.hyperparams["weights"] != "uniform":
        raise ValueError("only euclidean distance with uniform weights is implemented")
    if X.shape[0] < k:
        raise ValueError(f"k-NN needs at least k={k} training rows, got {X.shape[0]}")
    return KNNModel(spec.algorithm, spec, n_classes, X.shape[1], X, y)
