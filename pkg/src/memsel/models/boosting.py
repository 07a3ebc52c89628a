"""Discrete multiclass AdaBoost (SAMME) over depth-1 Gini stumps."""
from __future__ import annotations

import numpy as np

from .base import TrainedModel, softmax_rows


class _SortedColumns:
    def __init__(self, X):
        self.order = np.argsort(X, axis=0, kind="stable")
        self.sorted = np.take_along_axis(X, self.order, axis=0)
        self.valid = self.sorted[1:] > self.sorted[:-1]


def fit_stump(cols: _SortedColumns, y, w, n_classes):
    """Weighted-Gini stump. Returns ``(feature, threshold, left_class, right_class)``.

    ``feature == -1`` means no feature varies; the stump then predicts the
    weighted majority class on both sides. Ties prefer the lower feature
    index, then the lower split position.
    """
    n, d = cols.sorted.shape
    W1h = np.zeros((n, n_classes))
    W1h[np.arange(n), y] = w
    total = W1h.sum(axis=0)
    majority = int(np.argmax(total))
    L = np.cumsum(W1h[cols.order[:-1]], axis=0)  # (n-1, d, K)
    R = total - L
    lw = L.sum(axis=2)
    rw = R.sum(axis=2)
    ok = cols.valid & (lw > 0) & (rw > 0)
    if not ok.any():
        return -1, 0.0, majority, majority
    with np.errstate(divide="ignore", invalid="ignore"):
        proxy = (L ** 2).sum(axis=2) / lw + (R ** 2).sum(axis=2) / rw
    proxy = np.where(ok, proxy, -np.inf)
    # column-major argmax: lowest feature first, then lowest split position
    flat = int(np.argmax(proxy.T))
    f, i = divmod(flat, n - 1)
    a, b = cols.sorted[i, f], cols.sorted[i + 1, f]
    thr = a + (b - a) / 2.0
    if thr >= b:
        thr = a
    best = (proxy[i, f], f, thr, int(np.argmax(L[i, f])), int(np.argmax(R[i, f])))
    return best[1:]


def _stump_predict(X, stump):
    f, thr, lc, rc = stump
    if f < 0:
        return np.full(X.shape[0], lc, dtype=np.int64)
    return np.where(X[:, f] <= thr, lc, rc).astype(np.int64)


class AdaBoostModel(TrainedModel):
    def __init__(self, algorithm, spec, n_classes, n_features_in, stumps, alphas, errors, fallback):
        super().__init__(algorithm, spec, n_classes, n_features_in)
        self.stumps = list(stumps)
        self.alphas = np.asarray(alphas, dtype=np.float64)
        self.errors = np.asarray(errors, dtype=np.float64)
        self.fallback = int(fallback)

    def decision_function(self, X):
        X = self._check(X)
        out = np.zeros((X.shape[0], self.n_classes))
        rows = np.arange(X.shape[0])
        if not self.stumps:
            out[:, self.fallback] = 1.0
        for stump, alpha in zip(self.stumps, self.alphas):
            out[rows, _stump_predict(X, stump)] += alpha
        return out

    def _predict(self, X):
        return np.argmax(self.decision_function(X), axis=1)

    def _predict_proba(self, X):
        return softmax_rows(self.decision_function(X) / max(self.n_classes - 1, 1))

    def state(self):
        st = np.array([[s[0], s[1], s[2], s[3]] for s in self.stumps], dtype=np.float64).reshape(-1, 4)
        return {"stumps": st, "alphas": self.alphas, "errors": self.errors, "fallback": np.array([self.fallback])}

    @classmethod
    def from_state(cls, algorithm, spec, n_classes, n_features_in, state):
        stumps = [(int(r[0]), float(r[1]), int(r[2]), int(r[3])) for r in state["stumps"]]
        return cls(algorithm, spec, n_classes, n_features_in, stumps, state["alphas"], state["errors"],
                   int(state["fallback"][0]))


def fit_adaboost(spec, X, y, n_classes, trace=None):
    """SAMME boosting.

    Stump weight is ``lr * (log((1 - err) / err) + log(K - 1))``; misclassified
    rows are up-weighted by ``exp(weight)`` and weights renormalised. Boosting
    stops early on a perfect stump (accepted, then stop) or one no better than
    chance, ``err >= 1 - 1/K`` (rejected). If ``trace`` is a list, the
    normalised weight vector after every round is appended to it.
    """
    hp = spec.hyperparams
    n, d = X.shape
    K = n_classes
    lr = float(hp["learning_rate"])
    cols = _SortedColumns(np.asarray(X, dtype=np.float64))
    w = np.full(n, 1.0 / n)
    stumps, alphas, errors = [], [], []
    fallback = int(np.argmax(np.bincount(y, minlength=K)))
    for _ in range(int(hp["n_estimators"])):
        stump = fit_stump(cols, y, w, K)
        miss = _stump_predict(X, stump) != y
        err = float(w[miss].sum() / w.sum())
        if err >= 1.0 - 1.0 / K:
            break
        eps = max(err, 1e-10)
        alpha = lr * (np.log((1.0 - eps) / eps) + np.log(K - 1))
        stumps.append(stump)
        alphas.append(alpha)
        errors.append(err)
        if err <= 0.0:
            break
        w = w * np.exp(alpha * miss)
        w /= w.sum()
        if trace is not None:
            trace.append(w.copy())
    return AdaBoostModel(spec.algorithm, spec, K, d, stumps, alphas, errors, fallback)
