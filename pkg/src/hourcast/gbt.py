"""Gradient-boosted regression trees with squared-error loss.

Exact greedy split search over midpoints of consecutive distinct feature
values. With unit hessians the split gain is

    G_L^2 / (n_L + lambda) + G_R^2 / (n_R + lambda) - G^2 / (n + lambda)

and a leaf holding residual sum ``G`` over ``n`` rows takes the value
``G / (n + lambda)``. A node splits only when the best gain is strictly
positive. Ties go to the lowest feature index, then the lowest threshold.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import asdict, dataclass, field

import numpy as np
from numba import njit
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

FORMAT_VERSION = 1


@dataclass(frozen=True)
class GbtParams:
    n_trees: int = 100
    learning_rate: float = 0.1
    max_depth: int = 5
    colsample: float = 1.0
    l2_lambda: float = 1.0
    min_samples_leaf: int = 1
    # pinned: row subsampling off, no L1 term, no minimum split gain
    subsample: float = 1.0
    l1_alpha: float = 0.0
    gamma_min_split_gain: float = 0.0

    def __post_init__(self):
        if self.n_trees < 1:
            raise ValueError("n_trees must be >= 1")
        if not 0 < self.learning_rate <= 1:
            raise ValueError("learning_rate must lie in (0, 1]")
        if not 0 < self.colsample <= 1:
            raise ValueError("colsample must lie in (0, 1]")
        if self.max_depth < 0:
            raise ValueError("max_depth must be >= 0")
        if self.l2_lambda < 0:
            raise ValueError("l2_lambda must be >= 0")
        if self.min_samples_leaf < 1:
            raise ValueError("min_samples_leaf must be >= 1")
        if (self.subsample, self.l1_alpha, self.gamma_min_split_gain) != (1.0, 0.0, 0.0):
            raise ValueError("subsample, l1_alpha and gamma_min_split_gain are fixed at 1, 0, 0")


@dataclass
class Tree:
    """Flattened binary tree; ``feature == -1`` marks a leaf. Rows with
    ``x[feature] < threshold`` go left."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    n_samples: np.ndarray

    @property
    def n_internal(self) -> int:
        return int(np.sum(self.feature >= 0))

    def depth(self) -> int:
        def walk(i):
            if self.feature[i] < 0:
                return 0
            return 1 + max(walk(self.left[i]), walk(self.right[i]))
        return walk(0)

    def apply(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(len(X), dtype=np.int64)
        active = self.feature[node] >= 0
        while active.any():
            rows = np.nonzero(active)[0]
            n = node[rows]
            go_left = X[rows, self.feature[n]] < self.threshold[n]
            node[rows] = np.where(go_left, self.left[n], self.right[n])
            active = self.feature[node] >= 0
        return node

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.value[self.apply(X)]

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
            "n_samples": self.n_samples.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Tree":
        return cls(
            np.asarray(d["feature"], dtype=np.int64),
            np.asarray(d["threshold"], dtype=float),
            np.asarray(d["left"], dtype=np.int64),
            np.asarray(d["right"], dtype=np.int64),
            np.asarray(d["value"], dtype=float),
            np.asarray(d["n_samples"], dtype=np.int64),
        )


@dataclass
class TreeEnsemble:
    base_score: float
    trees: list[Tree]
    params: GbtParams
    n_features: int
    train_loss: list[float] = field(default_factory=list)

    @property
    def split_counts(self) -> dict[int, int]:
        counts: Counter = Counter()
        for tree in self.trees:
            counts.update(int(f) for f in tree.feature if f >= 0)
        return dict(sorted(counts.items()))

    def predict(self, X, n_trees: int | None = None) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        single = X.ndim == 1
        X = np.atleast_2d(X)
        if X.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} features, got {X.shape[1]}")
        out = np.full(len(X), self.base_score)
        for tree in self.trees[:n_trees]:
            out += self.params.learning_rate * tree.predict(X)
        return out[0] if single else out

    def to_json(self) -> str:
        return json.dumps({
            "format_version": FORMAT_VERSION,
            "base_score": self.base_score,
            "n_features": self.n_features,
            "params": asdict(self.params),
            "trees": [t.to_dict() for t in self.trees],
        })

    @classmethod
    def from_json(cls, text: str) -> "TreeEnsemble":
        d = json.loads(text)
        if d.get("format_version") != FORMAT_VERSION:
            raise ValueError(f"unsupported ensemble format {d.get('format_version')!r}")
        return cls(
            float(d["base_score"]),
            [Tree.from_dict(t) for t in d["trees"]],
            GbtParams(**d["params"]),
            int(d["n_features"]),
        )


@njit(cache=True)
def _best_split(X, resid, order, features, lam, min_leaf):
    """Scan every candidate feature of one node.

    ``order[j]`` lists the node's rows sorted by ``X[:, features[j]]``.
    Returns (candidate position, threshold, gain); position -1 means no split.
    """
    k, n = order.shape
    total = 0.0
    for i in range(n):
        total += resid[order[0, i]]
    parent = total * total / (n + lam)
    best_gain = 0.0
    best_j = -1
    best_thr = 0.0
    for j in range(k):
        f = features[j]
        gl = 0.0
        v = X[order[j, 0], f]
        for i in range(n - 1):
            gl += resid[order[j, i]]
            vn = X[order[j, i + 1], f]
            if vn != v:
                nl = i + 1
                nr = n - nl
                if nl >= min_leaf and nr >= min_leaf:
                    gr = total - gl
                    gain = gl * gl / (nl + lam) + gr * gr / (nr + lam) - parent
                    if gain > best_gain:
                        best_gain = gain
                        best_j = j
                        thr = 0.5 * (v + vn)
                        if thr <= v:
                            thr = vn
                        best_thr = thr
            v = vn
    return best_j, best_thr, best_gain


@njit(cache=True)
def _partition(order, goes_left, n_left):
    """Stable split of every row of ``order`` by the sample mask."""
    k, n = order.shape
    left = np.empty((k, n_left), dtype=order.dtype)
    right = np.empty((k, n - n_left), dtype=order.dtype)
    for j in range(k):
        a = 0
        b = 0
        for i in range(n):
            r = order[j, i]
            if goes_left[r]:
                left[j, a] = r
                a += 1
            else:
                right[j, b] = r
                b += 1
    return left, right


def _grow_tree(X, resid, presorted, features, params: GbtParams) -> Tree:
    feat, thr, left, right, value, count = [], [], [], [], [], []
    lam = float(params.l2_lambda)

    def new_node():
        for arr, v in ((feat, -1), (thr, 0.0), (left, -1), (right, -1), (value, 0.0), (count, 0)):
            arr.append(v)
        return len(feat) - 1

    # order: node rows sorted per candidate column
    stack = [(new_node(), presorted, 0)]
    while stack:
        node, order, depth = stack.pop()
        rows = order[0]
        n = len(rows)
        count[node] = n
        g = float(np.sum(resid[rows]))
        value[node] = g / (n + lam)
        if depth >= params.max_depth or n < 2 * params.min_samples_leaf:
            continue
        j, t, gain = _best_split(X, resid, order, features, lam, params.min_samples_leaf)
        if j < 0:
            continue
        f = int(features[j])
        goes_left = np.zeros(len(X), dtype=bool)
        goes_left[rows] = X[rows, f] < t
        # children at max depth only need their row sets
        keep = order if depth + 1 < params.max_depth else order[:1]
        left_order, right_order = _partition(keep, goes_left, int(goes_left.sum()))
        feat[node], thr[node] = f, t
        lnode = new_node()
        rnode = new_node()
        left[node], right[node] = lnode, rnode
        # right pushed first so the left subtree is numbered first
        stack.append((rnode, right_order, depth + 1))
        stack.append((lnode, left_order, depth + 1))
    return Tree(
        np.asarray(feat, dtype=np.int64),
        np.asarray(thr, dtype=float),
        np.asarray(left, dtype=np.int64),
        np.asarray(right, dtype=np.int64),
        np.asarray(value, dtype=float),
        np.asarray(count, dtype=np.int64),
    )


def fit_ensemble(X, y, params: GbtParams, seed: int = 0) -> TreeEnsemble:
    """Stagewise squared-error boosting; deterministic given (X, y, params, seed)."""
    X = np.asfortranarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or len(X) != len(y):
        raise ValueError("X must be 2-D with one row per target")
    if len(y) < 2:
        raise ValueError("at least two samples are required")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise ValueError("non-finite values in X or y")
    n, width = X.shape
    rng = np.random.default_rng(seed)
    presorted = np.ascontiguousarray(np.argsort(X, axis=0, kind="stable").T)
    k = min(width, math.ceil(params.colsample * width))

    base = float(np.mean(y))
    pred = np.full(n, base)
    ensemble = TreeEnsemble(base, [], params, width, [float(np.mean((y - pred) ** 2))])
    if np.all(y == y[0]):
        return ensemble
    for _ in range(params.n_trees):
        features = np.sort(rng.choice(width, size=k, replace=False)).astype(np.int64)
        resid = y - pred
        order = presorted[features]
        tree = _grow_tree(X, resid, order, features, params)
        pred = pred + params.learning_rate * tree.predict(X)
        ensemble.trees.append(tree)
        ensemble.train_loss.append(float(np.mean((y - pred) ** 2)))
    return ensemble


def split_importance(ensemble: TreeEnsemble) -> dict[int, int]:
    """Number of times each feature is used as a split across all trees."""
    return ensemble.split_counts


class GradientBoostedTreeRegressor(BaseEstimator, RegressorMixin):
    """Scikit-learn style wrapper around :func:`fit_ensemble`.

    Parameters
    ----------
    n_trees : int, default=100
    learning_rate : float, default=0.1
    max_depth : int, default=5
    colsample : float, default=1.0
        Fraction of columns drawn (without replacement) for each tree.
    l2_lambda : float, default=1.0
        L2 penalty on leaf values.
    min_samples_leaf : int, default=1
    random_state : int, default=0
    """

    def __init__(self, n_trees=100, learning_rate=0.1, max_depth=5, colsample=1.0,
                 l2_lambda=1.0, min_samples_leaf=1, random_state=0):
        self.n_trees = n_trees
        self.learning_rate = learning_rate
        self.max_depth = max_depth
        self.colsample = colsample
        self.l2_lambda = l2_lambda
        self.min_samples_leaf = min_samples_leaf
        self.random_state = random_state

    def _params(self) -> GbtParams:
        return GbtParams(self.n_trees, self.learning_rate, self.max_depth, self.colsample,
                         self.l2_lambda, self.min_samples_leaf)

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=float, y_numeric=True)
        self.ensemble_ = fit_ensemble(X, y, self._params(), self.random_state)
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self, "ensemble_")
        X = check_array(X, dtype=float)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} features, got {X.shape[1]}")
        return self.ensemble_.predict(X)

    @property
    def feature_importances_(self) -> np.ndarray:
        """Split counts per feature (not normalized)."""
        check_is_fitted(self, "ensemble_")
        out = np.zeros(self.n_features_in_)
        for f, c in self.ensemble_.split_counts.items():
            out[f] = c
        return out
