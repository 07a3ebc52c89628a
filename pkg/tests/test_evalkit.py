import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from memsel.dataset import Task, TaskView
from memsel.evalkit import (
    EvaluationReport,
    FoldError,
    Selection,
    confusion,
    cross_validate,
    macro_f1,
    per_class_f1,
    select_features,
    stratified_folds,
)
from memsel.models import ClassifierSpec
from memsel.synthgen import SynthSpec, make_blobs
from oracles import f1_oracle


def _view(X, y, names=None):
    K = int(y.max()) + 1
    names = names or tuple(f"f{j}" for j in range(X.shape[1]))
    return TaskView(Task("type3") if K == 3 else Task("binary"), np.asarray(y, dtype=np.int64),
                    tuple(f"c{i}" for i in range(K)), np.arange(len(y)), np.asarray(X, dtype=float),
                    tuple(names), "testhash")


def _blob_view(n=300, d=8, inf=3, sep=3.0, seed=0):
    X, y, informative = make_blobs(SynthSpec(n, d, inf, 3, sep, seed))
    return _view(X, y), informative


# -- folds -----------------------------------------------------------------------------

def test_folds_exact_division():
    y = np.array([0] * 5 + [1] * 5)
    plan = stratified_folds(y, 5, seed=3)
    for f in range(5):
        assert sorted(y[plan.test_rows(f)].tolist()) == [0, 1]


def test_folds_7_5_split():
    y = np.array([0] * 7 + [1] * 5)
    plan = stratified_folds(y, 5, seed=0)
    sizes0 = [int(np.sum(y[plan.test_rows(f)] == 0)) for f in range(5)]
    sizes1 = [int(np.sum(y[plan.test_rows(f)] == 1)) for f in range(5)]
    assert sizes0 == [2, 2, 1, 1, 1]
    assert sizes1 == [1, 1, 1, 1, 1]


def test_folds_errors():
    with pytest.raises(ValueError):
        stratified_folds(np.array([0, 1, 0, 1]), 1)
    with pytest.raises(ValueError, match="at least k"):
        stratified_folds(np.array([0] * 10 + [1] * 3), 5)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(5, 40), min_size=2, max_size=5), st.integers(2, 5), st.integers(0, 1000))
def test_folds_partition_and_stratification(sizes, k, seed):
    y = np.concatenate([np.full(s, c) for c, s in enumerate(sizes)])
    y = np.random.default_rng(seed).permutation(y)
    plan = stratified_folds(y, k, seed)
    seen = np.concatenate([plan.test_rows(f) for f in range(k)])
    np.testing.assert_array_equal(np.sort(seen), np.arange(len(y)))
    for c in range(len(sizes)):
        per = [int(np.sum(y[plan.test_rows(f)] == c)) for f in range(k)]
        assert max(per) - min(per) <= 1
    for f in range(k):
        assert len(np.intersect1d(plan.train_rows(f), plan.test_rows(f))) == 0


# -- metrics ---------------------------------------------------------------------------

def test_macro_f1_hand_values():
    assert macro_f1([0, 0, 1, 1], [0, 1, 1, 1], 2) == pytest.approx(11 / 15, abs=1e-15)
    assert macro_f1([0, 0, 1, 1], [1, 1, 1, 1], 2) == pytest.approx(1 / 3, abs=1e-15)
    assert macro_f1([0, 1, 2], [0, 1, 2], 3) == 1.0
    np.testing.assert_allclose(per_class_f1(confusion([0, 0, 1, 1], [0, 1, 1, 1], 2)), [2 / 3, 4 / 5])


def test_macro_f1_absent_class_counts_as_zero():
    # class 2 never occurs nor is predicted -> F1 0 by convention
    assert macro_f1([0, 1], [0, 1], 3) == pytest.approx(2 / 3)


@settings(max_examples=100, deadline=None)
@given(st.integers(2, 5).flatmap(lambda K: st.tuples(
    st.just(K), st.lists(st.tuples(st.integers(0, K - 1), st.integers(0, K - 1)), min_size=1, max_size=40))))
def test_macro_f1_matches_fraction_oracle(case):
    K, pairs = case
    t, p = zip(*pairs)
    assert macro_f1(list(t), list(p), K) == pytest.approx(float(f1_oracle(t, p, K)), abs=1e-12)


def test_confusion_values():
    np.testing.assert_array_equal(confusion([0, 0, 1, 1], [0, 1, 1, 1], 2), [[1, 1], [0, 2]])
    np.testing.assert_array_equal(confusion([0, 1, 2], [0, 1, 2], 3), np.eye(3, dtype=int))
    np.testing.assert_array_equal(confusion([], [], 2), np.zeros((2, 2)))
    with pytest.raises(ValueError):
        confusion([0, 1], [0], 2)


# -- cross-validation ------------------------------------------------------------------

def test_cv_report_structure_and_accuracy_identity():
    view, _ = _blob_view()
    rep = cross_validate(view, ClassifierSpec("lda"), Selection("anova", 0.5), k=5, seed=1)
    assert len(rep.folds) == 5
    assert sum(f.n_test for f in rep.folds) == view.n_rows
    for f in rep.folds:
        assert f.accuracy == np.trace(f.confusion) / f.confusion.sum()
        assert len(f.selected) == 4
    assert rep.pooled_confusion.sum() == view.n_rows
    prov = rep.provenance
    assert prov["selection_mode"] == "perfold"
    assert prov["f1_zero_division"] == 0.0
    assert prov["dataset_hash"] == "testhash"


def test_cv_no_selection_is_plain_cv():
    view, _ = _blob_view()
    a = cross_validate(view, ClassifierSpec("knn"), None)
    b = cross_validate(view, ClassifierSpec("knn"), Selection("mi", 1.0))
    assert [f.macro_f1 for f in a.folds] == [f.macro_f1 for f in b.folds]
    assert a.folds[0].selected is None


def test_cv_byte_identical_reports():
    view, _ = _blob_view(seed=3)
    spec = ClassifierSpec("rf", {"n_estimators": 10}, seed=2)
    a = cross_validate(view, spec, Selection("mi", 0.25), seed=4).to_json()
    b = cross_validate(view, spec, Selection("mi", 0.25), seed=4).to_json()
    assert a == b


def test_report_round_trip():
    view, _ = _blob_view()
    rep = cross_validate(view, ClassifierSpec("lda"), Selection("chi2", 0.5, {"min_shift": True}))
    back = EvaluationReport.from_dict(rep.to_dict())
    assert back.to_json() == rep.to_json()
    assert "seconds" not in rep.to_json()
    assert "seconds" in rep.to_json(timings=True)


def test_leakage_safety_under_test_row_mutation():
    view, _ = _blob_view(n=200, d=10, inf=3, sep=1.0, seed=5)
    plan = stratified_folds(view.labels, 5, 0)
    sel = Selection("anova", 0.3)
    base = cross_validate(view, ClassifierSpec("lda"), sel, seed=0)
    for fold in range(5):
        X = view.X.copy()
        te = plan.test_rows(fold)
        X[te] = np.random.default_rng(fold).normal(scale=100.0, size=(len(te), X.shape[1]))
        mutated = _view(X, view.labels)
        rep = cross_validate(mutated, ClassifierSpec("lda"), sel, seed=0)
        assert rep.folds[fold].selected == base.folds[fold].selected
        # the per-fold selection equals selection on training rows alone
        tr = plan.train_rows(fold)
        assert rep.folds[fold].selected == select_features(X[tr], view.labels[tr], sel).tolist()


def test_global_mode_sees_test_rows():
    view, _ = _blob_view(n=200, d=10, inf=3, sep=1.0, seed=5)
    rep = cross_validate(view, ClassifierSpec("lda"), Selection("anova", 0.3), mode="global")
    assert rep.provenance["selection_mode"] == "global"
    assert len({tuple(f.selected) for f in rep.folds}) == 1
    assert rep.folds[0].selected == select_features(view.X, view.labels, Selection("anova", 0.3)).tolist()


def test_fold_failure_names_fold():
    rng = np.random.default_rng(0)
    view = _view(rng.normal(size=(30, 3)), np.repeat([0, 1, 2], 10))
    with pytest.raises(FoldError) as info:
        cross_validate(view, ClassifierSpec("mnb"), None)
    assert info.value.fold == 0
    assert isinstance(info.value.cause, ValueError)


def test_selection_validation():
    with pytest.raises(ValueError):
        Selection("lasso", 0.5)
    with pytest.raises(ValueError):
        Selection("mi", 1.5)
    with pytest.raises(ValueError):
        cross_validate(_blob_view()[0], ClassifierSpec("lda"), mode="sideways")


def test_rf_mi_recovers_informative_columns():
    view, informative = _blob_view(n=600, d=20, inf=5, sep=5.0, seed=1)
    rep = cross_validate(view, ClassifierSpec("rf", {"n_estimators": 30}), Selection("mi", 0.25))
    assert rep.macro_f1_mean >= 0.95
    assert all(len(set(f.selected) & set(informative.tolist())) >= 3 for f in rep.folds)


def test_pooled_aggregate():
    view, _ = _blob_view(seed=2)
    rep = cross_validate(view, ClassifierSpec("knn"), None)
    f1, acc = rep.score("pooled")
    assert acc == np.trace(rep.pooled_confusion) / view.n_rows
    assert 0 <= f1 <= 1
    with pytest.raises(ValueError):
        rep.score("median")
