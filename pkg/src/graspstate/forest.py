"""Random forest classifier built from first principles.

CART trees with Gini splitting, midpoint thresholds between consecutive
distinct feature values, per-node feature subsampling and bootstrap
resampling per tree. Split scores are computed from integer class
counts (sum of squared counts over child size), which makes the search
exactly reproducible by a naive reference implementation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .core import GraspState
from .features import FeatureWindow

N_CLASSES = len(GraspState)


@dataclass(frozen=True)
class RfHyperparams:
    n_estimators: int = 100
    criterion: str = "gini"
    max_features: Optional[int] = None  # None resolves to floor(sqrt(n_features))
    min_samples_split: int = 2
    max_depth: Optional[int] = None
    seed: int = 0

    def __post_init__(self):
        if self.n_estimators < 1:
            raise ValueError("n_estimators must be >= 1")
        if self.criterion != "gini":
            raise ValueError("only gini splitting is supported")
        if self.max_features is not None and self.max_features < 1:
            raise ValueError("max_features must be >= 1")
        if self.min_samples_split < 2:
            raise ValueError("min_samples_split must be >= 2")
        if self.max_depth is not None and self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")

    def resolve_max_features(self, n_features: int) -> int:
        if self.max_features is None:
            return max(1, int(math.floor(math.sqrt(n_features))))
        if self.max_features > n_features:
            raise ValueError(
                f"max_features={self.max_features} exceeds {n_features} features"
            )
        return self.max_features


def gini(counts: Sequence) -> float:
    """Gini impurity 1 - sum((c_i / total)^2) of a class-count vector."""
    counts = np.asarray(counts, dtype=np.int64)
    if (counts < 0).any():
        raise ValueError("negative class count")
    total = int(counts.sum())
    if total == 0:
        raise ValueError("gini of an empty count vector")
    acc = 0.0
    for c in counts:
        frac = int(c) / total
        acc += frac * frac
    return 1.0 - acc


def _best_split_block(V: np.ndarray, y: np.ndarray) -> Optional[tuple]:
    """Best split over the columns of V; see best_split for the contract.

    Scores splits as sum_child(sum_c count^2)/child_size, all from
    integer counts, so a naive per-split reference reproduces every
    float bit for bit. Returns (column, threshold, weighted_impurity).
    """
    n = len(y)
    if n < 2:
        return None
    total = np.bincount(y, minlength=N_CLASSES).astype(np.int64)
    parent_score = float((total * total).sum()) / n

    order = np.argsort(V, axis=0, kind="stable")
    vs = np.take_along_axis(V, order, axis=0)
    ys = y[order]  # (n, m)
    cum = np.cumsum(np.eye(N_CLASSES, dtype=np.int64)[ys], axis=0)
    left = cum[:-1]  # class counts left of each cut position
    nl = np.arange(1, n, dtype=np.int64)[:, None]
    nr = n - nl
    score = (left * left).sum(axis=2) / nl + ((total - left) ** 2).sum(axis=2) / nr
    score[vs[1:] == vs[:-1]] = -np.inf  # cuts inside a run of equal values

    # feature-major flat argmax: ties fall to the lower column, then the
    # lower cut position, i.e. the lower threshold
    flat = np.argmax(score.T)
    col, pos = divmod(int(flat), score.shape[0])
    best_score = float(score[pos, col])
    if not best_score > parent_score:
        return None
    threshold = (vs[pos, col] + vs[pos + 1, col]) / 2.0
    return (col, float(threshold), 1.0 - best_score / n)


def best_split(
    X: np.ndarray, y: np.ndarray, candidate_features: Sequence
) -> Optional[tuple]:
    """Exhaustive best Gini split over the candidate features.

    Candidate thresholds are midpoints between consecutive distinct
    sorted values. Ties break toward the lower feature index, then the
    lower threshold. Returns (feature, threshold, weighted_impurity), or
    None when no split strictly reduces impurity.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2 or X.shape[0] != len(y):
        raise ValueError("X must be (n_samples, n_features) matching y")
    feats = sorted({int(f) for f in candidate_features})
    if not feats:
        raise ValueError("no candidate features")
    if feats[0] < 0 or feats[-1] >= X.shape[1]:
        raise ValueError("candidate feature outside the matrix")
    found = _best_split_block(X[:, feats], y)
    if found is None:
        return None
    col, threshold, impurity = found
    return (feats[col], threshold, impurity)


@dataclass
class DecisionTree:
    """Flat node arrays; feature -1 marks a leaf."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    counts: np.ndarray  # (n_nodes, N_CLASSES) class counts of training samples

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def predict_one(self, x: np.ndarray) -> int:
        node = 0
        while self.feature[node] >= 0:
            if x[self.feature[node]] <= self.threshold[node]:
                node = self.left[node]
            else:
                node = self.right[node]
        return int(np.argmax(self.counts[node]))

    def predict_batch(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(len(X), dtype=np.int64)
        while True:
            feat = self.feature[node]
            active = feat >= 0
            if not active.any():
                break
            rows = np.nonzero(active)[0]
            f = feat[rows]
            go_left = X[rows, f] <= self.threshold[node[rows]]
            node[rows] = np.where(
                go_left, self.left[node[rows]], self.right[node[rows]]
            )
        return np.argmax(self.counts[node], axis=1)


@dataclass
class RfModel:
    trees: list
    hyperparams: RfHyperparams
    n_features: int
    classes: tuple = field(default_factory=lambda: tuple(GraspState))


def _grow_tree(
    X: np.ndarray,
    y: np.ndarray,
    hp: RfHyperparams,
    mtry: int,
    rng: np.random.Generator,
) -> DecisionTree:
    n_features = X.shape[1]
    feature, threshold, left, right, counts = [], [], [], [], []

    def new_node():
        feature.append(-1)
        threshold.append(np.nan)
        left.append(-1)
        right.append(-1)
        counts.append(None)
        return len(feature) - 1

    # depth-first, left child first; rng consumption order is fixed by
    # this traversal so rebuilds are exact
    root = new_node()
    stack = [(root, np.arange(len(y)), 0)]
    while stack:
        node, idx, depth = stack.pop()
        y_node = y[idx]
        node_counts = np.bincount(y_node, minlength=N_CLASSES).astype(np.int64)
        counts[node] = node_counts
        if (
            len(idx) < hp.min_samples_split
            or (node_counts > 0).sum() <= 1
            or (hp.max_depth is not None and depth >= hp.max_depth)
        ):
            continue
        cand = np.sort(rng.choice(n_features, size=mtry, replace=False))
        found = _best_split_block(X[np.ix_(idx, cand)], y_node)
        if found is None:
            continue
        col, thr, _ = found
        f = int(cand[col])
        go_left = X[idx, f] <= thr
        node_left = new_node()
        node_right = new_node()
        feature[node] = f
        threshold[node] = thr
        left[node] = node_left
        right[node] = node_right
        # push right first so the left subtree is built first
        stack.append((node_right, idx[~go_left], depth + 1))
        stack.append((node_left, idx[go_left], depth + 1))

    return DecisionTree(
        feature=np.asarray(feature, dtype=np.int64),
        threshold=np.asarray(threshold, dtype=float),
        left=np.asarray(left, dtype=np.int64),
        right=np.asarray(right, dtype=np.int64),
        counts=np.stack(counts),
    )


def _training_matrix(windows: Sequence[FeatureWindow]) -> tuple:
    # canonical order makes training invariant to caller-side shuffling
    ordered = sorted(windows, key=lambda w: (w.trial_id, w.end_frame))
    X = np.stack([w.values for w in ordered]).astype(float)
    y = np.asarray([int(w.label) for w in ordered], dtype=np.int64)
    return X, y


def rf_train(windows: Sequence[FeatureWindow], hp: Optional[RfHyperparams] = None) -> RfModel:
    """Fit a forest on labeled feature windows.

    Each tree sees a bootstrap resample (same size as the training set)
    drawn from a generator seeded with hp.seed XOR the tree index.
    """
    hp = hp or RfHyperparams()
    if len(windows) == 0:
        raise ValueError("no training windows")
    X, y = _training_matrix(windows)
    if len(np.unique(y)) < 2:
        raise ValueError("training labels span fewer than two classes")
    n, n_features = X.shape
    mtry = hp.resolve_max_features(n_features)
    trees = []
    for t in range(hp.n_estimators):
        rng = np.random.default_rng((hp.seed ^ t) & ((1 << 64) - 1))
        boot = rng.integers(0, n, size=n)
        trees.append(_grow_tree(X[boot], y[boot], hp, mtry, rng))
    return RfModel(trees=trees, hyperparams=hp, n_features=n_features)


def _window_values(window) -> np.ndarray:
    values = window.values if isinstance(window, FeatureWindow) else window
    return np.asarray(values, dtype=float)


def rf_predict(model: RfModel, window) -> GraspState:
    """Majority vote over per-tree leaf-majority classes.

    Vote ties resolve to the earliest class in canonical order.
    """
    x = _window_values(window)
    if x.shape != (model.n_features,):
        raise ValueError(
            f"window has shape {x.shape}, model expects ({model.n_features},)"
        )
    votes = np.zeros(N_CLASSES, dtype=np.int64)
    for tree in model.trees:
        votes[tree.predict_one(x)] += 1
    return GraspState(int(np.argmax(votes)))


def rf_predict_batch(model: RfModel, X: np.ndarray) -> np.ndarray:
    """Vectorized rf_predict over a (n_samples, n_features) matrix."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != model.n_features:
        raise ValueError(f"X must be (n, {model.n_features})")
    votes = np.zeros((len(X), N_CLASSES), dtype=np.int64)
    for tree in model.trees:
        votes[np.arange(len(X)), tree.predict_batch(X)] += 1
    return np.argmax(votes, axis=1)
