"""Independent reference computations: plain loops over the textbook formulas."""
from fractions import Fraction

import numpy as np


def chi2_oracle(X, y):
    out = []
    classes = sorted(set(y.tolist()))
    n = len(y)
    for j in range(X.shape[1]):
        total = sum(X[:, j])
        s = 0.0
        for c in classes:
            obs = sum(X[i, j] for i in range(n) if y[i] == c)
            exp = total * sum(1 for v in y if v == c) / n
            if exp > 0:
                s += (obs - exp) ** 2 / exp
        out.append(s)
    return np.array(out)


def anova_oracle(X, y):
    out = []
    classes = sorted(set(y.tolist()))
    n, K = len(y), len(classes)
    for j in range(X.shape[1]):
        x = [float(v) for v in X[:, j]]
        grand = sum(x) / n
        ssb = ssw = 0.0
        for c in classes:
            g = [x[i] for i in range(n) if y[i] == c]
            m = sum(g) / len(g)
            ssb += len(g) * (m - grand) ** 2
            ssw += sum((v - m) ** 2 for v in g)
        out.append((ssb / (K - 1)) / (ssw / (n - K)))
    return np.array(out)


def random_instance(seed, n_max=30, d_max=6):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(8, n_max))
    d = int(rng.integers(1, d_max))
    K = int(rng.integers(2, 5))
    y = np.concatenate([np.arange(K), rng.integers(0, K, n - K)])
    X = rng.uniform(0, 10, (n, d)) * rng.uniform(0.1, 100, d)
    return X, y


def f1_oracle(y_true, y_pred, K):
    """Per-class precision/recall arithmetic with exact fractions."""
    out = []
    for c in range(K):
        tp = sum(1 for t, p in zip(y_true, y_pred) if t == c and p == c)
        fp = sum(1 for t, p in zip(y_true, y_pred) if t != c and p == c)
        fn = sum(1 for t, p in zip(y_true, y_pred) if t == c and p != c)
        if tp == 0:
            out.append(Fraction(0))
            continue
        prec, rec = Fraction(tp, tp + fp), Fraction(tp, tp + fn)
        out.append(2 * prec * rec / (prec + rec))
    return sum(out) / K
