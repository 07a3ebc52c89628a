"""Compiled CART kernel shared by the random forest and extra-trees models.

Trees are stored as flat arrays: ``feature[i] < 0`` marks a leaf, otherwise
rows with ``x[feature] <= threshold`` go to ``left[i]``. ``value[i]`` is the
majority class of the training rows that reached node i (lowest id on ties).
"""
import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def _majority(counts):
    best = 0
    for c in range(1, counts.shape[0]):
        if counts[c] > counts[best]:
            best = c
    return best


@njit(cache=True, nogil=True)
def build_tree(X, y, sample_idx, n_classes, max_features, random_splits, seed, min_samples_split, max_depth):
    """Grow one Gini tree on ``X[sample_idx]``.

    ``sample_idx`` may repeat rows (bootstrap). Candidate features are drawn
    without replacement per node; constant features do not count towards
    ``max_features`` and drawing continues past them. With ``random_splits``
    each candidate gets one threshold drawn uniformly between its node
    minimum and maximum, otherwise the best midpoint is searched exhaustively.
    ``max_depth < 0`` means unlimited.
    """
    np.random.seed(seed)
    n_features = X.shape[1]
    n = sample_idx.shape[0]
    capacity = 2 * n + 1
    feature = np.full(capacity, -1, np.int64)
    threshold = np.zeros(capacity)
    left = np.full(capacity, -1, np.int64)
    right = np.full(capacity, -1, np.int64)
    value = np.zeros(capacity, np.int64)

    idx = sample_idx.copy()
    stack_node = np.empty(capacity, np.int64)
    stack_start = np.empty(capacity, np.int64)
    stack_end = np.empty(capacity, np.int64)
    stack_depth = np.empty(capacity, np.int64)
    top = 0
    stack_node[0] = 0
    stack_start[0] = 0
    stack_end[0] = n
    stack_depth[0] = 0
    top = 1
    n_nodes = 1

    features = np.arange(n_features)
    counts = np.zeros(n_classes)
    lcounts = np.zeros(n_classes)
    xs = np.empty(n)
    ys = np.empty(n, np.int64)

    while top > 0:
        top -= 1
        node = stack_node[top]
        start = stack_start[top]
        end = stack_end[top]
        depth = stack_depth[top]
        m = end - start

        counts[:] = 0.0
        for i in range(start, end):
            counts[y[idx[i]]] += 1.0
        value[node] = _majority(counts)
        n_nonzero = 0
        for c in range(n_classes):
            if counts[c] > 0:
                n_nonzero += 1
        if n_nonzero <= 1 or m < min_samples_split or (max_depth >= 0 and depth >= max_depth):
            continue

        total_sq = 0.0
        for c in range(n_classes):
            total_sq += counts[c] * counts[c]

        best_proxy = -1.0
        best_feature = -1
        best_thr = 0.0
        visited = 0
        # Fisher-Yates draw of candidate features, stopping once enough are non-constant.
        for f_pos in range(n_features):
            if visited >= max_features:
                break
            j = f_pos + np.random.randint(0, n_features - f_pos)
            tmp = features[f_pos]
            features[f_pos] = features[j]
            features[j] = tmp
            f = features[f_pos]

            lo = np.inf
            hi = -np.inf
            for i in range(start, end):
                v = X[idx[i], f]
                if v < lo:
                    lo = v
                if v > hi:
                    hi = v
            if not hi > lo:
                continue
            visited += 1

            if random_splits:
                thr = lo + (hi - lo) * np.random.random()
                if thr >= hi:
                    thr = lo
                lcounts[:] = 0.0
                nl = 0.0
                for i in range(start, end):
                    if X[idx[i], f] <= thr:
                        lcounts[y[idx[i]]] += 1.0
                        nl += 1.0
                nr = m - nl
                sql = 0.0
                sqr = 0.0
                for c in range(n_classes):
                    sql += lcounts[c] * lcounts[c]
                    rc = counts[c] - lcounts[c]
                    sqr += rc * rc
                proxy = sql / nl + sqr / nr
                if proxy > best_proxy:
                    best_proxy = proxy
                    best_feature = f
                    best_thr = thr
                continue

            for i in range(m):
                xs[i] = X[idx[start + i], f]
            order = np.argsort(xs[:m])
            for i in range(m):
                ys[i] = y[idx[start + order[i]]]
            lcounts[:] = 0.0
            sql = 0.0
            sqr = total_sq
            for i in range(m - 1):
                c = ys[i]
                # incremental update of sum of squared class counts on each side
                sql += 2.0 * lcounts[c] + 1.0
                rc = counts[c] - lcounts[c]
                sqr -= 2.0 * rc - 1.0
                lcounts[c] += 1.0
                a = xs[order[i]]
                b = xs[order[i + 1]]
                if b <= a:
                    continue
                nl = i + 1.0
                proxy = sql / nl + sqr / (m - nl)
                if proxy > best_proxy:
                    best_proxy = proxy
                    best_feature = f
                    thr = a + (b - a) / 2.0
                    if thr >= b:
                        thr = a
                    best_thr = thr

        if best_feature < 0:
            continue

        # partition idx[start:end] in place
        i = start
        j = end - 1
        while i <= j:
            if X[idx[i], best_feature] <= best_thr:
                i += 1
            else:
                tmp = idx[i]
                idx[i] = idx[j]
                idx[j] = tmp
                j -= 1
        mid = i
        if mid == start or mid == end:
            continue

        feature[node] = best_feature
        threshold[node] = best_thr
        left[node] = n_nodes
        right[node] = n_nodes + 1
        n_nodes += 2
        stack_node[top] = right[node]
        stack_start[top] = mid
        stack_end[top] = end
        stack_depth[top] = depth + 1
        top += 1
        stack_node[top] = left[node]
        stack_start[top] = start
        stack_end[top] = mid
        stack_depth[top] = depth + 1
        top += 1

    return (
        feature[:n_nodes].copy(),
        threshold[:n_nodes].copy(),
        left[:n_nodes].copy(),
        right[:n_nodes].copy(),
        value[:n_nodes].copy(),
    )


@njit(cache=True, nogil=True)
def apply_tree(X, feature, threshold, left, right, value):
    out = np.empty(X.shape[0], np.int64)
    for r in range(X.shape[0]):
        node = 0
        while feature[node] >= 0:
            if X[r, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[r] = value[node]
    return out
