"""
Scoring features with three filter statistics
=============================================

Gaussian blobs where only a few columns carry the label, scored with the
chi-square, ANOVA F and nearest-neighbour mutual information filters.
Run with ``python demos/01_feature_scoring.py``.
"""
import numpy as np

from memsel.featsel import anova_f_scores, chi2_scores, mi_scores_knn, mi_scores_plugin, rank_and_select
from memsel.synthgen import SynthSpec, make_blobs

# 1500 rows, 20 columns, 5 of them informative
X, y, informative = make_blobs(SynthSpec(n_samples=1500, n_features=20, n_informative=5, n_classes=3, seed=0))
print("informative columns:", informative.tolist())

# chi-square treats values as nonnegative mass, so shift the blobs first
scores = {
    "chi2": chi2_scores(X, y, min_shift=True),
    "anova": anova_f_scores(X, y),
    "mi": mi_scores_knn(X, y, k=3, seed=0),
}
for name, vec in scores.items():
    kept = rank_and_select(vec, 0.25).kept_indices
    hit = len(set(kept) & set(informative.tolist()))
    print(f"{name:>5}: top 25% = {kept.tolist()}  ({hit}/5 informative)")

# The kNN estimator and a plain histogram estimate agree closely (nats)
plug = mi_scores_plugin(X, y, bins=32)
print("\nMI per column, knn vs plug-in:")
for j in range(X.shape[1]):
    flag = "*" if j in informative else " "
    print(f"  {flag} col {j:2d}  {scores['mi'].scores[j]:.3f}  {plug.scores[j]:.3f}")

# ANOVA F does not care about units; chi-square scales with them
c = 1000.0
print("\nANOVA unchanged by x1000:", np.allclose(anova_f_scores(c * X, y).scores, scores["anova"].scores))
shifted = X - X.min(axis=0)
print("chi2 grows x1000:", np.allclose(chi2_scores(c * shifted, y).scores, c * scores["chi2"].scores))
