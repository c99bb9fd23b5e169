"""Classical comparison models, written directly against numpy.

Every model exposes scores in [0, 1]: trees report leaf positive
fractions, margin-based models are squashed through a sigmoid.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .dataset import Dataset
from .errors import ConstraintViolation, DivergenceError
from .network import sigmoid

log = logging.getLogger(__name__)


class BaselineKind(str, enum.Enum):
    decision_tree = "decision_tree"
    logistic_l2 = "logistic_l2"
    random_forest = "random_forest"
    linear_svm = "linear_svm"
    rbf_classifier = "rbf_classifier"


DEFAULT_PARAMS = {
    BaselineKind.decision_tree: {"max_depth": 8, "min_samples_split": 2},
    BaselineKind.logistic_l2: {"lam": 1e-2, "max_iter": 2000, "tol": 1e-6},
    BaselineKind.random_forest: {"n_trees": 100, "max_depth": 8, "min_samples_split": 2},
    BaselineKind.linear_svm: {"lam": 1e-3, "epochs": 50, "batch_size": 32},
    BaselineKind.rbf_classifier: {"gamma": None, "lam": 1e-2, "max_iter": 500, "tol": 1e-6},
}
# Shared by every kind; "balanced" weights positives by negatives/positives
# like the network's default class weighting.
COMMON_PARAMS = {"class_weight": "balanced"}


# ---------------------------------------------------------------------------
# CART


class DecisionTree:
    """Binary CART classifier with Gini impurity.

    ``max_features`` limits the features examined at each split (random
    subset drawn from ``rng``); None examines them all. Splits send
    ``x <= threshold`` left.
    """

    def __init__(self, max_depth=8, min_samples_split=2, max_features=None):
        self.max_depth = max_depth
        self.min_samples_split = min_samples_split
        self.max_features = max_features
        self.feature = []
        self.threshold = []
        self.left = []
        self.right = []
        self.value = []

    def _new_node(self, value):
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(value)
        return len(self.value) - 1

    def _best_split(self, X, y, w, feats):
        n = y.size
        Xf = X[:, feats]
        order = np.argsort(Xf, axis=0, kind="stable")
        xs = np.take_along_axis(Xf, order, axis=0)
        ws = w[order]
        w_left = np.cumsum(ws, axis=0)[:-1]
        pos_left = np.cumsum(ws * y[order], axis=0)[:-1]
        w_total = w.sum()
        pos_total = w @ y
        w_right = w_total - w_left
        pl = pos_left / w_left
        pr = (pos_total - pos_left) / w_right
        impurity = (w_left * 2 * pl * (1 - pl) + w_right * 2 * pr * (1 - pr)) / w_total
        impurity[xs[1:] == xs[:-1]] = np.inf
        flat = int(np.argmin(impurity.T))
        j, i = divmod(flat, n - 1)
        best = impurity[i, j]
        if not np.isfinite(best):
            return None
        p = pos_total / w_total
        if best >= 2 * p * (1 - p) - 1e-12:
            return None
        return feats[j], 0.5 * (xs[i, j] + xs[i + 1, j])

    def fit(self, X, y, rng=None, sample_weight=None):
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        w = np.ones(y.size) if sample_weight is None else np.asarray(sample_weight, dtype=np.float64)
        rng = rng if rng is not None else np.random.default_rng(0)
        m = X.shape[1]
        stack = [(np.arange(y.size), 0, None, None)]
        while stack:
            idx, depth, parent, side = stack.pop()
            yi, wi = y[idx], w[idx]
            node = self._new_node(float(wi @ yi / wi.sum()))
            if parent is not None:
                (self.left if side == 0 else self.right)[parent] = node
            if depth >= self.max_depth or idx.size < self.min_samples_split or yi.min() == yi.max():
                continue
            if self.max_features is None or self.max_features >= m:
                feats = np.arange(m)
            else:
                feats = np.sort(rng.choice(m, size=self.max_features, replace=False))
            found = self._best_split(X[idx], yi, wi, feats)
            if found is None:
                continue
            f, t = found
            self.feature[node] = int(f)
            self.threshold[node] = float(t)
            go_left = X[idx, f] <= t
            stack.append((idx[~go_left], depth + 1, node, 1))
            stack.append((idx[go_left], depth + 1, node, 0))
        self._freeze()
        return self

    def _freeze(self):
        self.feature = np.asarray(self.feature, dtype=np.intp)
        self.threshold = np.asarray(self.threshold)
        self.left = np.asarray(self.left, dtype=np.intp)
        self.right = np.asarray(self.right, dtype=np.intp)
        self.value = np.asarray(self.value)

    @property
    def node_count(self):
        return len(self.value)

    def predict_proba(self, X):
        X = np.asarray(X, dtype=np.float64)
        node = np.zeros(X.shape[0], dtype=np.intp)
        active = self.feature[node] >= 0
        while active.any():
            rows = np.flatnonzero(active)
            cur = node[rows]
            go_left = X[rows, self.feature[cur]] <= self.threshold[cur]
            node[rows] = np.where(go_left, self.left[cur], self.right[cur])
            active = self.feature[node] >= 0
        return self.value[node]


class RandomForest:
    """Bagged CART trees with sqrt(m) features per split; scores are mean leaf fractions."""

    def __init__(self, n_trees=100, max_depth=8, min_samples_split=2, max_features=None):
        self.n_trees = n_trees
        self.max_depth = max_depth
        self.min_samples_split = min_samples_split
        self.max_features = max_features
        self.trees = []

    def fit(self, X, y, rng, sample_weight=None):
        n, m = X.shape
        w = np.ones(n) if sample_weight is None else np.asarray(sample_weight, dtype=np.float64)
        k = self.max_features or max(1, int(math.sqrt(m)))
        for _ in range(self.n_trees):
            boot = rng.integers(0, n, size=n)
            tree = DecisionTree(self.max_depth, self.min_samples_split, max_features=k)
            self.trees.append(tree.fit(X[boot], y[boot], rng, w[boot]))
        return self

    def predict_proba(self, X):
        return np.mean([t.predict_proba(X) for t in self.trees], axis=0)


# ---------------------------------------------------------------------------
# linear and kernel models


def _normalised(sample_weight, n):
    """Sample weights rescaled to mean 1 (ones when None)."""
    if sample_weight is None:
        return np.ones(n)
    w = np.asarray(sample_weight, dtype=np.float64)
    return w * (n / w.sum())


def _top_eigenvalue(A_mul, dim, iters=50, seed=0):
    v = np.random.default_rng(seed).standard_normal(dim)
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(iters):
        w = A_mul(v)
        lam = float(np.linalg.norm(w))
        if lam == 0:
            return 0.0
        v = w / lam
    return lam


class LogisticL2:
    """L2-regularised logistic regression fitted by full-batch gradient descent.

    Minimises ``weighted mean log-loss + lam/2 * ||w||^2``; the intercept
    is not penalised. The step is ``1 / L`` with L the gradient's Lipschitz
    bound.
    """

    def __init__(self, lam=1e-2, max_iter=2000, tol=1e-6):
        self.lam, self.max_iter, self.tol = lam, max_iter, tol
        self.w = None
        self.b = 0.0

    def fit(self, X, y, rng=None, sample_weight=None):
        n, m = X.shape
        c = _normalised(sample_weight, n)
        Xa = np.hstack([X, np.ones((n, 1))])
        top = _top_eigenvalue(lambda v: Xa.T @ (c * (Xa @ v)) / n, m + 1)
        step = 1.0 / (0.25 * top + self.lam)
        theta = np.zeros(m + 1)
        reg = np.r_[np.full(m, self.lam), 0.0]
        for it in range(self.max_iter):
            z = Xa @ theta
            grad = Xa.T @ (c * (sigmoid(z) - y)) / n + reg * theta
            if not np.all(np.isfinite(grad)):
                raise DivergenceError(f"logistic_l2 diverged (step {step:.3g})", epoch=it, learning_rate=step)
            theta -= step * grad
            if np.linalg.norm(grad) < self.tol:
                break
        self.w, self.b = theta[:m], float(theta[m])
        return self

    def decision_function(self, X):
        return X @ self.w + self.b

    def predict_proba(self, X):
        return sigmoid(self.decision_function(X))


class LinearSVM:
    """Hinge loss + L2 fitted by averaged mini-batch subgradient descent (Pegasos steps).

    The bias is carried as an extra constant feature and is regularised with
    the weights.
    """

    def __init__(self, lam=1e-3, epochs=50, batch_size=32):
        self.lam, self.epochs, self.batch_size = lam, epochs, batch_size
        self.w = None
        self.b = 0.0

    def fit(self, X, y, rng, sample_weight=None):
        n, m = X.shape
        c = _normalised(sample_weight, n)
        Xa = np.hstack([X, np.ones((n, 1))])
        s = 2.0 * y - 1.0
        theta = np.zeros(m + 1)
        avg = np.zeros(m + 1)
        radius = 1.0 / math.sqrt(self.lam)
        t = 0
        for _ in range(self.epochs):
            order = rng.permutation(n)
            for start in range(0, n, self.batch_size):
                t += 1
                idx = order[start:start + self.batch_size]
                eta = 1.0 / (self.lam * t)
                viol = s[idx] * (Xa[idx] @ theta) < 1.0
                coef = (c[idx] * s[idx])[viol]
                grad = self.lam * theta - (coef[:, None] * Xa[idx][viol]).sum(axis=0) / idx.size
                theta = theta - eta * grad
                norm = np.linalg.norm(theta)
                if norm > radius:
                    theta *= radius / norm
                if not np.all(np.isfinite(theta)):
                    raise DivergenceError(f"linear_svm diverged (step {eta:.3g})", learning_rate=eta)
                avg += (theta - avg) / t
        self.w, self.b = avg[:m], float(avg[m])
        return self

    def decision_function(self, X):
        return X @ self.w + self.b

    def predict_proba(self, X):
        return sigmoid(self.decision_function(X))


def rbf_kernel(A, B, gamma):
    sq = (A * A).sum(1)[:, None] + (B * B).sum(1)[None, :] - 2.0 * A @ B.T
    return np.exp(-gamma * np.maximum(sq, 0.0))


class KernelLogistic:
    """Kernel logistic regression with an RBF kernel, fitted by gradient descent over the Gram matrix.

    ``f(x) = sum_i alpha_i k(x_i, x) + b`` minimising
    ``mean log-loss + lam/2 * alpha' K alpha``.
    """

    def __init__(self, gamma=None, lam=1e-2, max_iter=500, tol=1e-6):
        self.gamma, self.lam, self.max_iter, self.tol = gamma, lam, max_iter, tol
        self.support = None
        self.alpha = None
        self.b = 0.0

    def fit(self, X, y, rng=None, sample_weight=None):
        n, m = X.shape
        c = _normalised(sample_weight, n)
        gamma = self.gamma if self.gamma is not None else 1.0 / m
        self.gamma_ = gamma
        K = rbf_kernel(X, X, gamma)
        top = _top_eigenvalue(lambda v: K @ v, n)
        # Steps follow the functional gradient K^-1 * grad = r + lam * alpha,
        # which avoids the ill-conditioning of K in alpha-space.
        step = 1.0 / (0.25 * c.max() * (top / n + 1.0) + self.lam)
        alpha = np.zeros(n)
        b = 0.0
        for it in range(self.max_iter):
            f = K @ alpha + b
            r = c * (sigmoid(f) - y) / n
            d_alpha = r + self.lam * alpha
            d_b = r.sum()
            if not np.all(np.isfinite(d_alpha)):
                raise DivergenceError(f"rbf_classifier diverged (step {step:.3g})", epoch=it, learning_rate=step)
            alpha -= step * d_alpha
            b -= step * d_b
            if math.sqrt(float(d_alpha @ d_alpha) + d_b * d_b) < self.tol:
                break
        self.support, self.alpha, self.b = X.copy(), alpha, float(b)
        return self

    def decision_function(self, X):
        return rbf_kernel(np.asarray(X, dtype=np.float64), self.support, self.gamma_) @ self.alpha + self.b

    def predict_proba(self, X):
        return sigmoid(self.decision_function(X))


_ESTIMATORS = {
    BaselineKind.decision_tree: lambda p: DecisionTree(p["max_depth"], p["min_samples_split"]),
    BaselineKind.logistic_l2: lambda p: LogisticL2(p["lam"], p["max_iter"], p["tol"]),
    BaselineKind.random_forest: lambda p: RandomForest(p["n_trees"], p["max_depth"], p["min_samples_split"],
                                                       p.get("max_features")),
    BaselineKind.linear_svm: lambda p: LinearSVM(p["lam"], p["epochs"], p["batch_size"]),
    BaselineKind.rbf_classifier: lambda p: KernelLogistic(p["gamma"], p["lam"], p["max_iter"], p["tol"]),
}


@dataclass
class BaselineModel:
    kind: BaselineKind
    params: dict
    loci: tuple
    estimator: object
    seed: int = 0
    meta: dict = field(default_factory=dict)


def train_baseline(kind, ds: Dataset, params: dict | None = None, seed: int = 0) -> BaselineModel:
    kind = BaselineKind(kind)
    ds.require_both_classes(f"training {kind.value}")
    merged = {**DEFAULT_PARAMS[kind], **COMMON_PARAMS}
    unknown = set(params or {}) - set(merged) - {"max_features"}
    if unknown:
        raise ValueError(f"unknown parameter(s) for {kind.value}: {sorted(unknown)}")
    merged.update(params or {})
    if merged["class_weight"] == "balanced":
        weights = np.where(ds.y == 1, ds.n_negative / ds.n_positive, 1.0)
    elif merged["class_weight"] is None:
        weights = None
    else:
        raise ValueError(f"class_weight must be 'balanced' or None, got {merged['class_weight']!r}")
    rng = np.random.default_rng(seed)
    est = _ESTIMATORS[kind](merged).fit(ds.X, ds.y.astype(np.float64), rng, sample_weight=weights)
    return BaselineModel(kind, merged, tuple(ds.loci), est, seed, {"n": ds.n, "m": ds.m})


def predict_baseline(model: BaselineModel, ds: Dataset) -> np.ndarray:
    if tuple(ds.loci) != model.loci:
        have = set(ds.loci)
        raise ConstraintViolation(
            [l for l in model.loci if l not in have],
            f"{ds.name}: loci do not match the {model.kind.value} model's training loci",
        )
    return np.asarray(model.estimator.predict_proba(ds.X), dtype=np.float64)
