"""Linear discriminant analysis and naive Bayes classifiers."""
from __future__ import annotations

import numpy as np
import scipy.linalg

from .base import TrainedModel, softmax_rows


class LinearScoreModel(TrainedModel):
    """Class scores of the form ``X @ coef.T + intercept``; probabilities by softmax."""

    def __init__(self, algorithm, spec, n_classes, n_features_in, coef, intercept):
        super().__init__(algorithm, spec, n_classes, n_features_in)
        self.coef = np.asarray(coef, dtype=np.float64)
        self.intercept = np.asarray(intercept, dtype=np.float64)

    def decision_function(self, X):
        return self._check(X) @ self.coef.T + self.intercept

    def _predict_proba(self, X):
        return softmax_rows(X @ self.coef.T + self.intercept)

    def _predict(self, X):
        return np.argmax(X @ self.coef.T + self.intercept, axis=1)

    def state(self):
        return {"coef": self.coef, "intercept": self.intercept}

    @classmethod
    def from_state(cls, algorithm, spec, n_classes, n_features_in, state):
        return cls(algorithm, spec, n_classes, n_features_in, state["coef"], state["intercept"])


def fit_lda(spec, X, y, n_classes):
    """Shared-covariance Gaussian discriminants.

    The pooled within-class covariance (denominator N - K) gets
    ``reg * trace / d`` added to its diagonal before solving.
    """
    n, d = X.shape
    counts = np.bincount(y, minlength=n_classes).astype(np.float64)
    priors = counts / n
    means = np.zeros((n_classes, d))
    np.add.at(means, y, X)
    means /= np.maximum(counts, 1.0)[:, None]
    centered = X - means[y]
    cov = centered.T @ centered / max(n - n_classes, 1)
    ridge = spec.hyperparams["reg"] * np.trace(cov) / d
    if ridge <= 0:
        ridge = np.finfo(np.float64).tiny
    cov[np.diag_indices(d)] += ridge
    try:
        coef = scipy.linalg.solve(cov, means.T, assume_a="pos").T
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError):
        coef = np.linalg.lstsq(cov, means.T, rcond=None)[0].T
    with np.errstate(divide="ignore"):
        intercept = -0.5 * np.einsum("ij,ij->i", means, coef) + np.log(priors)
    return LinearScoreModel(spec.algorithm, spec, n_classes, d, coef, intercept)


def fit_mnb(spec, X, y, n_classes):
    """Multinomial naive Bayes on nonnegative feature mass with additive smoothing."""
    if (X < 0).any():
        r, c = np.argwhere(X < 0)[0]
        raise ValueError(f"MultinomialNB needs nonnegative features: column {c} is {float(X[r, c])!r} at row {r}")
    alpha = float(spec.hyperparams["alpha"])
    counts = np.bincount(y, minlength=n_classes).astype(np.float64)
    mass = np.zeros((n_classes, X.shape[1]))
    np.add.at(mass, y, X)
    mass += alpha
    log_theta = np.log(mass) - np.log(mass.sum(axis=1, keepdims=True))
    with np.errstate(divide="ignore"):
        log_prior = np.log(counts / counts.sum())
    return LinearScoreModel(spec.algorithm, spec, n_classes, X.shape[1], log_theta, log_prior)


class GaussianNBModel(TrainedModel):
    def __init__(self, algorithm, spec, n_classes, n_features_in, means, var, log_prior):
        super().__init__(algorithm, spec, n_classes, n_features_in)
        self.means, self.var, self.log_prior = means, var, log_prior

    def _joint(self, X):
        ll = -0.5 * (np.log(2 * np.pi * self.var).sum(axis=1)[None, :]
                     + (((X[:, None, :] - self.means[None]) ** 2) / self.var[None]).sum(axis=2))
        return ll + self.log_prior

    def _predict_proba(self, X):
        return softmax_rows(self._joint(X))

    def _predict(self, X):
        return np.argmax(self._joint(X), axis=1)

    def state(self):
        return {"means": self.means, "var": self.var, "log_prior": self.log_prior}

    @classmethod
    def from_state(cls, algorithm, spec, n_classes, n_features_in, state):
        return cls(algorithm, spec, n_classes, n_features_in, state["means"], state["var"], state["log_prior"])


def fit_gnb(spec, X, y, n_classes):
    counts = np.bincount(y, minlength=n_classes).astype(np.float64)
    means = np.zeros((n_classes, X.shape[1]))
    var = np.zeros_like(means)
    for c in range(n_classes):
        rows = X[y == c]
        if len(rows):
            means[c] = rows.mean(axis=0)
            var[c] = rows.var(axis=0)
    var += spec.hyperparams["var_smoothing"] * max(X.var(axis=0).max(), np.finfo(np.float64).tiny)
    with np.errstate(divide="ignore"):
        log_prior = np.log(counts / counts.sum())
    return GaussianNBModel(spec.algorithm, spec, n_classes, X.shape[1], means, var, log_prior)
