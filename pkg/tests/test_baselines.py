import numpy as np
import pytest

from prnet.baselines import (
    BaselineKind,
    DecisionTree,
    LogisticL2,
    predict_baseline,
    rbf_kernel,
    train_baseline,
)
from prnet.dataset import Dataset, restrict_to_loci
from prnet.errors import ConstraintViolation, DatasetError
from prnet.metrics import auc

QUICK = {
    "random_forest": {"n_trees": 15},
    "linear_svm": {"epochs": 20},
    "rbf_classifier": {"max_iter": 100},
}


@pytest.mark.parametrize("kind", [k.value for k in BaselineKind])
class TestEveryKind:
    def test_trains_and_scores_in_unit_interval(self, kind, small_cohort):
        _, _, tr, te = small_cohort
        model = train_baseline(kind, tr, QUICK.get(kind), seed=1)
        s = predict_baseline(model, te)
        assert s.shape == (te.n,)
        assert np.all((s >= 0) & (s <= 1))
        assert auc(s, te.y) > 0.6

    def test_deterministic(self, kind, small_cohort):
        tr, te = small_cohort[2], small_cohort[3]
        a = predict_baseline(train_baseline(kind, tr, QUICK.get(kind), seed=4), te)
        b = predict_baseline(train_baseline(kind, tr, QUICK.get(kind), seed=4), te)
        np.testing.assert_array_equal(a, b)

    def test_rejects_unknown_param(self, kind, small_cohort):
        with pytest.raises(ValueError, match="unknown"):
            train_baseline(kind, small_cohort[2], {"bogus": 1})

    def test_locus_mismatch(self, kind, small_cohort):
        tr, te = small_cohort[2], small_cohort[3]
        model = train_baseline(kind, tr, QUICK.get(kind))
        fewer = restrict_to_loci(te, te.loci[1:])
        with pytest.raises(ConstraintViolation) as info:
            predict_baseline(model, fewer)
        assert info.value.missing == [te.loci[0]]


def test_single_class_rejected(small_cohort):
    tr = small_cohort[2]
    pos = np.flatnonzero(tr.y == 1)
    only = Dataset([tr.sample_ids[i] for i in pos], tr.loci, tr.X[pos], tr.y[pos])
    with pytest.raises(DatasetError):
        train_baseline("logistic_l2", only)


def test_bad_class_weight(small_cohort):
    with pytest.raises(ValueError):
        train_baseline("logistic_l2", small_cohort[2], {"class_weight": "odd"})


def test_tree_fits_conjunction_exactly():
    X = np.array([[0, 0], [0, 1], [1, 0], [1, 1]] * 5, dtype=float)
    y = np.array([0, 0, 0, 1] * 5, dtype=float)
    tree = DecisionTree(max_depth=3).fit(X, y)
    np.testing.assert_array_equal(tree.predict_proba(X), y)


def test_tree_needs_positive_gain():
    # no single split helps on xor, so the greedy tree stays a leaf
    X = np.array([[0, 0], [0, 1], [1, 0], [1, 1]], dtype=float)
    tree = DecisionTree(max_depth=3).fit(X, np.array([0.0, 1.0, 1.0, 0.0]))
    assert tree.node_count == 1


def test_depth_one_tree_is_a_stump():
    X = np.array([[0.0], [1.0], [2.0], [3.0]])
    tree = DecisionTree(max_depth=1).fit(X, np.array([0.0, 0.0, 1.0, 1.0]))
    assert tree.node_count == 3


def test_logistic_separable_direction():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(200, 2))
    y = (X[:, 0] > 0).astype(float)
    model = LogisticL2(lam=1e-3).fit(X, y)
    assert model.w[0] > 5 * abs(model.w[1])


def test_rbf_kernel_values():
    A = np.array([[0.0, 0.0], [1.0, 0.0]])
    K = rbf_kernel(A, A, 0.5)
    np.testing.assert_allclose(K, [[1.0, np.exp(-0.5)], [np.exp(-0.5), 1.0]])


def test_stump_cannot_fit_xor():
    X = np.array([[0, 0], [0, 1], [1, 0], [1, 1]], dtype=float)
    y = np.array([0.0, 1.0, 1.0, 0.0])
    pred = DecisionTree(max_depth=1).fit(X, y).predict_proba(X) >= 0.5
    assert np.mean(pred == y) <= 0.75
