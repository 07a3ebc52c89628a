"""
Why feature selection belongs inside the folds
==============================================

On pure noise a classifier should score at chance. Selecting the "best"
noise columns on all rows before cross-validation lets the test rows vote
on the selection, and the estimate climbs above chance. Selecting inside
each training fold keeps it honest.
Run with ``python demos/02_leakage.py``.
"""
import numpy as np

from memsel.dataset import Task, TaskView
from memsel.evalkit import Selection, cross_validate, stratified_folds
from memsel.models import ClassifierSpec

rng = np.random.default_rng(0)
n, d = 120, 2000
X = rng.standard_normal((n, d))
y = np.repeat([0, 1], n // 2)
view = TaskView(Task("binary"), y, ("a", "b"), np.arange(n), X, tuple(f"x{j}" for j in range(d)))

spec = ClassifierSpec("knn")
sel = Selection("anova", 0.005)  # keep 10 of 2000 columns
for mode in ("perfold", "global"):
    rep = cross_validate(view, spec, sel, k=5, seed=0, mode=mode)
    print(f"{mode:>8}: macro-F1 {rep.macro_f1_mean:.3f} +- {rep.macro_f1_std:.3f}")
print("chance level is about 0.5")

# the folds themselves: every row once, each class spread evenly
plan = stratified_folds(y, 5, seed=0)
print("\nrows per fold and class:")
for f in range(5):
    print(f"  fold {f}: {np.bincount(y[plan.test_rows(f)], minlength=2).tolist()}")
