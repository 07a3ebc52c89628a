"""Univariate filter scores (chi-square, ANOVA F, mutual information) and top-fraction selection.

Every scorer takes a feature matrix ``X`` of shape (n_samples, n_features)
and integer class ids ``y`` and returns a :class:`FeatureScoreVector`. Scores
are per feature, finite and nonnegative. Mutual information is in nats.
"""
from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np
from scipy.special import digamma

METHODS = ("chi2", "anova", "mi")

# Stand-in for an infinite F ratio, so that ranking still works.
F_SENTINEL = float(np.finfo(np.float64).max)


@dataclass(frozen=True, eq=False)
class FeatureScoreVector:
    method: str
    scores: np.ndarray
    params: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        s = np.asarray(self.scores, dtype=np.float64)
        if s.ndim != 1:
            raise ValueError("scores must be 1-D")
        if not (np.isfinite(s).all() and (s >= 0).all()):
            raise ValueError(f"{self.method}: scores must be finite and nonnegative")
        s.setflags(write=False)
        object.__setattr__(self, "scores", s)

    def __len__(self) -> int:
        return len(self.scores)

    def to_csv(self, path: str | os.PathLike, feature_names: Sequence[str]) -> None:
        """Write ``feature_name,method,score`` rows."""
        if len(feature_names) != len(self.scores):
            raise ValueError("one name per score required")
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["feature_name", "method", "score"])
            for name, s in zip(feature_names, self.scores):
                w.writerow([name, self.method, repr(float(s))])


@dataclass(frozen=True, eq=False)
class SelectionProfile:
    fraction: float
    kept_indices: np.ndarray
    ranking: np.ndarray
    tie_break: str = "lower-index-first"

    @property
    def k(self) -> int:
        return len(self.kept_indices)


def _check_xy(X, y):
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    if X.ndim != 2:
        raise ValueError("X must be 2-D")
    if y.shape != (X.shape[0],):
        raise ValueError(f"y has shape {y.shape}, expected ({X.shape[0]},)")
    if not np.issubdtype(y.dtype, np.integer):
        raise ValueError("y must hold integer class ids")
    return X, y.astype(np.int64)


def _class_indicator(y):
    classes, inverse = np.unique(y, return_inverse=True)
    Y = np.zeros((len(y), len(classes)))
    Y[np.arange(len(y)), inverse] = 1.0
    return classes, Y


def chi2_scores(X, y, *, min_shift: bool = False, variant: str = "mass", bins: int = 10) -> FeatureScoreVector:
    """Chi-square statistic of each feature against the class labels.

    With the default ``variant="mass"`` each feature is treated as a
    nonnegative quantity distributed over classes: the observed value for
    class c is the feature's sum over rows of c, the expected value is the
    feature's total times the row share of c, and the score is
    ``sum_c (O_c - E_c)**2 / E_c``. Features with zero total score 0.

    ``variant="binned"`` instead discretises each feature into ``bins``
    equal-width bins and returns Pearson's statistic of the (bin x class)
    contingency table. It is provided for sensitivity checks.

    Parameters
    ----------
    min_shift : bool
        Subtract each column's minimum first; needed when features can be
        negative. Only affects the mass variant.
    """
    X, y = _check_xy(X, y)
    if variant == "binned":
        return _chi2_binned(X, y, bins)
    if variant != "mass":
        raise ValueError(f"unknown chi-square variant {variant!r}")
    if min_shift and X.shape[0]:
        X = X - X.min(axis=0)
    elif (X < 0).any():
        r, c = np.argwhere(X < 0)[0]
        raise ValueError(f"chi2 needs nonnegative features: feature {c} is {float(X[r, c])!r} at row {r}")
    _, Y = _class_indicator(y)
    observed = Y.T @ X
    totals = X.sum(axis=0)
    share = Y.sum(axis=0) / len(y)
    expected = np.outer(share, totals)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(expected > 0, (observed - expected) ** 2 / expected, 0.0)
    scores = terms.sum(axis=0)
    scores[totals <= 0] = 0.0
    return FeatureScoreVector("chi2", np.maximum(scores, 0.0), {"variant": "mass", "min_shift": bool(min_shift)})


def _chi2_binned(X, y, bins):
    if bins < 2:
        raise ValueError("bins must be >= 2")
    _, Y = _class_indicator(y)
    n = len(y)
    scores = np.zeros(X.shape[1])
    for j in range(X.shape[1]):
        codes = _discretize(X[:, j], bins)
        B = np.zeros((codes.max() + 1, n))
        B[codes, np.arange(n)] = 1.0
        table = B @ Y
        expected = np.outer(table.sum(axis=1), table.sum(axis=0)) / n
        mask = expected > 0
        scores[j] = ((table[mask] - expected[mask]) ** 2 / expected[mask]).sum()
    return FeatureScoreVector("chi2", scores, {"variant": "binned", "bins": int(bins)})


def anova_f_scores(X, y) -> FeatureScoreVector:
    """One-way ANOVA F ratio per feature.

    ``F = (SS_between / (k - 1)) / (SS_within / (N - k))``. A zero within-class
    sum of squares gives :data:`F_SENTINEL` when the class means differ and 0
    when they do not.
    """
    X, y = _check_xy(X, y)
    classes, Y = _class_indicator(y)
    k, n = len(classes), len(y)
    if k < 2:
        raise ValueError("ANOVA needs at least two classes")
    if n <= k:
        raise ValueError(f"ANOVA needs more rows ({n}) than classes ({k})")
    counts = Y.sum(axis=0)
    grand = X.mean(axis=0)
    means = (Y.T @ X) / counts[:, None]
    ss_between = (counts[:, None] * (means - grand) ** 2).sum(axis=0)
    resid = X - means[np.searchsorted(classes, y)]
    ss_within = (resid ** 2).sum(axis=0)
    # Squared-deviation sums pick up rounding noise; treat values at that level as zero.
    scale = (X ** 2).sum(axis=0)
    tiny = 64 * np.finfo(np.float64).eps * scale
    between_zero = ss_between <= tiny
    within_zero = ss_within <= tiny
    with np.errstate(divide="ignore", invalid="ignore"):
        f = (ss_between / (k - 1)) / (ss_within / (n - k))
    f = np.where(within_zero, np.where(between_zero, 0.0, F_SENTINEL), f)
    f = np.where(between_zero & ~within_zero, 0.0, f)
    f = np.minimum(f, F_SENTINEL)
    return FeatureScoreVector("anova", f, {})


def _jitter_stream(seed: int, feature: int, n: int) -> np.ndarray:
    return np.random.default_rng([int(seed), int(feature)]).standard_normal(n)


def _kth_within_class_distance(v: np.ndarray, k: int) -> np.ndarray:
    """Distance from each sorted value in ``v`` to its k-th nearest other value."""
    n = len(v)
    cand = np.full((n, 2 * k), np.inf)
    for j in range(1, k + 1):
        cand[j:, j - 1] = v[j:] - v[:-j]
        cand[:-j, k + j - 1] = v[j:] - v[:-j]
    return np.partition(cand, k - 1, axis=1)[:, k - 1]


def _count_strictly_within(s: np.ndarray, x: np.ndarray, r: np.ndarray) -> np.ndarray:
    """For each x_i, count entries of sorted ``s`` with |s_j - x_i| < r_i."""
    lo = np.searchsorted(s, x - r, side="left")
    hi = np.searchsorted(s, x + r, side="right")
    n = len(s)
    # The searchsorted window is a superset; trim endpoints failing the exact test.
    while True:
        bad = (lo < hi) & (np.abs(s[np.minimum(lo, n - 1)] - x) >= r)
        if not bad.any():
            break
        lo = lo + bad
    while True:
        bad = (hi > lo) & (np.abs(s[np.maximum(hi - 1, 0)] - x) >= r)
        if not bad.any():
            break
        hi = hi - bad
    return hi - lo


def _mi_knn_single(x: np.ndarray, y: np.ndarray, k: int, seed: int, feature: int) -> float:
    n = len(x)
    if np.ptp(x) == 0:
        return 0.0
    # Canonical row order (value, then label) so the jitter realisation does
    # not depend on how the rows were permuted.
    order = np.lexsort((y, x))
    xs, ys = x[order], y[order]
    amp = 1e-10 * np.abs(xs).max()
    xs = xs + amp * _jitter_stream(seed, feature, n)

    radius = np.empty(n)
    k_cnt = np.empty(n)
    n_c = np.empty(n)
    for c in np.unique(ys):
        idx = np.flatnonzero(ys == c)
        vals = xs[idx]
        o = np.argsort(vals, kind="stable")
        d = _kth_within_class_distance(vals[o], k)
        radius[idx[o]] = d
        k_cnt[idx] = k
        n_c[idx] = len(idx)
    s = np.sort(xs)
    m = _count_strictly_within(s, xs, radius)
    mi = digamma(n) + digamma(k_cnt).mean() - digamma(n_c).mean() - digamma(m).mean()
    return max(0.0, float(mi))


def mi_scores_knn(X, y, k: int = 3, seed: int = 0) -> FeatureScoreVector:
    """Mutual information of each continuous feature with the discrete label.

    Nearest-neighbour estimator for a continuous/discrete pair: for each
    sample the distance to its k-th nearest same-class neighbour sets a
    radius, and ``m_i`` counts all samples strictly inside it (itself
    included). Then

        MI = psi(N) + psi(k) - <psi(N_c)> - <psi(m_i)>

    clamped at 0. Ties are broken by Gaussian jitter of scale
    ``1e-10 * max|x|`` drawn from a stream keyed by ``(seed, feature index)``.
    """
    X, y = _check_xy(X, y)
    if k < 1:
        raise ValueError("k must be >= 1")
    classes, counts = np.unique(y, return_counts=True)
    if (counts <= k).any():
        small = classes[counts <= k]
        raise ValueError(f"mi_scores_knn needs more than k={k} rows per class; class(es) {small.tolist()} too small")
    scores = np.array([_mi_knn_single(X[:, j], y, k, seed, j) for j in range(X.shape[1])])
    return FeatureScoreVector("mi", scores, {"estimator": "knn", "k": int(k), "seed": int(seed)})


def _discretize(x: np.ndarray, bins: int) -> np.ndarray:
    """Equal-width bin codes; data with at most ``bins`` distinct values keeps its own categories."""
    uniq, inverse = np.unique(x, return_inverse=True)
    if len(uniq) <= bins:
        return inverse.astype(np.int64)
    lo, hi = uniq[0], uniq[-1]
    codes = np.floor((x - lo) / (hi - lo) * bins).astype(np.int64)
    return np.clip(codes, 0, bins - 1)


def _entropy(counts: np.ndarray) -> float:
    p = counts[counts > 0] / counts.sum()
    return float(-(p * np.log(p)).sum())


def plugin_entropies(x: np.ndarray, y: np.ndarray, bins: int) -> tuple[float, float, float]:
    """Plug-in ``(H(X), H(Y), H(X, Y))`` in nats after discretising ``x``."""
    codes = _discretize(np.asarray(x, dtype=np.float64), bins)
    _, ycodes = np.unique(y, return_inverse=True)
    joint = codes * (ycodes.max() + 1) + ycodes
    return (
        _entropy(np.bincount(codes)),
        _entropy(np.bincount(ycodes)),
        _entropy(np.bincount(joint)),
    )


def mi_scores_plugin(X, y, bins: int = 32) -> FeatureScoreVector:
    """Plug-in mutual information ``H(X) + H(Y) - H(X, Y)`` on discretised features.

    Exact for discrete features with at most ``bins`` distinct values.
    """
    X, y = _check_xy(X, y)
    if bins < 2:
        raise ValueError("bins must be >= 2")
    scores = np.empty(X.shape[1])
    for j in range(X.shape[1]):
        hx, hy, hxy = plugin_entropies(X[:, j], y, bins)
        scores[j] = max(0.0, hx + hy - hxy)
    return FeatureScoreVector("mi", scores, {"estimator": "plugin", "bins": int(bins)})


def score_features(method: str, X, y, **params) -> FeatureScoreVector:
    """Dispatch to ``chi2``, ``anova`` or ``mi`` (nearest-neighbour) scoring."""
    if method == "chi2":
        return chi2_scores(X, y, **params)
    if method == "anova":
        return anova_f_scores(X, y, **params)
    if method == "mi":
        return mi_scores_knn(X, y, **params)
    raise ValueError(f"unknown selection method {method!r}; expected one of {METHODS}")


def n_selected(fraction: float, n_features: int) -> int:
    """``max(1, round_half_up(fraction * n_features))``."""
    return max(1, int(math.floor(fraction * n_features + 0.5)))


def rank_and_select(scores: FeatureScoreVector | np.ndarray, fraction: float) -> SelectionProfile:
    """Keep the top ``fraction`` of features by score.

    Ties go to the lower feature index. ``kept_indices`` is returned ascending.

    >>> rank_and_select(np.array([3.0, 3.0, 1.0]), 2 / 3).kept_indices
    array([0, 1])
    """
    s = scores.scores if isinstance(scores, FeatureScoreVector) else np.asarray(scores, dtype=np.float64)
    if not 0 < fraction <= 1:
        raise ValueError(f"fraction must lie in (0, 1], got {fraction}")
    if s.size == 0:
        raise ValueError("no scores to rank")
    ranking = np.argsort(-s, kind="stable")
    k = n_selected(fraction, len(s))
    kept = np.sort(ranking[:k])
    return SelectionProfile(float(fraction), kept, ranking)
