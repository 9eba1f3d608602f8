"""Classifier contract plus an in-engine random forest.

Everything that explains a model only talks to :class:`Classifier`; the forest
is one implementation of it. Trees are stored as flat node arrays so a whole
forest predicts a batch with a handful of vectorised steps per depth level.
"""
from __future__ import annotations

import json
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dataset import Dataset
from .errors import EmptyTestSet, SingleClassTraining

FOREST_FORMAT = "nuncf-forest"
FOREST_VERSION = 1


class Classifier(ABC):
    """Black-box prediction contract.

    ``predict_proba`` accepts a single instance (shape ``(m,)``) or a batch
    (shape ``(n, m)``) and returns probabilities of shape ``(K,)`` or
    ``(n, K)`` accordingly.
    """

    n_classes: int

    @abstractmethod
    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        ...

    def predict(self, X: np.ndarray):
        proba = self.predict_proba(X)
        # np.argmax returns the first maximum: ties go to the lowest class index
        if proba.ndim == 1:
            return int(np.argmax(proba))
        return np.argmax(proba, axis=1)


class FunctionClassifier(Classifier):
    """Wrap a vectorised ``f(X) -> (n, K) probabilities`` as a Classifier."""

    def __init__(self, fn, n_classes: int):
        self.fn = fn
        self.n_classes = n_classes

    def predict_proba(self, X):
        X = np.asarray(X, dtype=float)
        single = X.ndim == 1
        P = np.asarray(self.fn(np.atleast_2d(X)), dtype=float)
        return P[0] if single else P


@dataclass
class Tree:
    """One fitted decision tree in flat-array form.

    Leaves have ``feature == -1`` and point ``left``/``right`` at themselves,
    which lets batch traversal run a fixed number of steps.
    """

    feature: np.ndarray     # int64, split feature or -1
    threshold: np.ndarray   # float64; category index for equality splits
    categorical: np.ndarray  # bool, equality split (x == threshold goes left)
    left: np.ndarray        # int64
    right: np.ndarray       # int64
    counts: np.ndarray      # (n_nodes, K) class histogram of training rows
    depth: int

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def leaves(self) -> np.ndarray:
        return np.flatnonzero(self.feature < 0)

    def apply(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(len(X), dtype=np.int64)
        rows = np.arange(len(X))
        for _ in range(self.depth):
            f = self.feature[node]
            x = X[rows, np.maximum(f, 0)]
            t = self.threshold[node]
            go_left = np.where(self.categorical[node], x == t, x <= t)
            node = np.where(go_left, self.left[node], self.right[node])
        return node

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        c = self.counts[self.apply(X)]
        return c / c.sum(axis=1, keepdims=True)


def _gini_best_continuous(x, y, n_classes, min_leaf):
    """Best ``x <= t`` split of one continuous column. Returns (impurity, t)."""
    n = len(x)
    order = np.argsort(x, kind="stable")
    xs = x[order]
    onehot = np.zeros((n, n_classes))
    onehot[np.arange(n), y[order]] = 1.0
    left = np.cumsum(onehot, axis=0)[:-1]        # left counts after position i
    pos = np.arange(min_leaf - 1, n - min_leaf)  # split after xs[pos]
    pos = pos[xs[pos] < xs[pos + 1]]
    if len(pos) == 0:
        return None
    lc = left[pos]
    rc = left[-1] + onehot[-1] - lc
    nl = (pos + 1).astype(float)
    nr = n - nl
    # weighted child impurity * n  ==  nl - sum(lc^2)/nl + nr - sum(rc^2)/nr
    score = n - (lc * lc).sum(axis=1) / nl - (rc * rc).sum(axis=1) / nr
    k = int(np.argmin(score))
    i = pos[k]
    lo, hi = xs[i], xs[i + 1]
    t = lo + (hi - lo) / 2.0
    if not lo <= t < hi:
        t = lo
    return score[k] / n, float(t)


def _gini_best_categorical(x, y, n_classes, n_categories, min_leaf):
    """Best one-vs-rest ``x == c`` split. Returns (impurity, c)."""
    n = len(x)
    xi = x.astype(np.int64)
    table = np.bincount(xi * n_classes + y, minlength=n_categories * n_classes)
    table = table.reshape(n_categories, n_classes).astype(float)
    lc = table
    nl = lc.sum(axis=1)
    total = table.sum(axis=0)
    rc = total - lc
    nr = n - nl
    ok = (nl >= min_leaf) & (nr >= min_leaf)
    if not ok.any():
        return None
    with np.errstate(divide="ignore", invalid="ignore"):
        score = n - (lc * lc).sum(axis=1) / nl - (rc * rc).sum(axis=1) / nr
    score = np.where(ok, score, np.inf)
    c = int(np.argmin(score))
    return score[c] / n, float(c)


def _build_tree(X, y, n_classes, n_categories, max_features, max_depth, min_leaf, rng) -> Tree:
    m = X.shape[1]
    feature, threshold, categorical, left, right, counts = [], [], [], [], [], []

    def new_node(idx):
        feature.append(-1)
        threshold.append(0.0)
        categorical.append(False)
        left.append(len(left))
        right.append(len(right))
        counts.append(np.bincount(y[idx], minlength=n_classes))
        return len(feature) - 1

    root = new_node(np.arange(len(y)))
    stack = [(root, np.arange(len(y)), 0)]
    tree_depth = 0
    while stack:
        node, idx, depth = stack.pop()
        tree_depth = max(tree_depth, depth)
        n = len(idx)
        if (max_depth is not None and depth >= max_depth) or n < 2 * min_leaf \
                or np.count_nonzero(counts[node]) <= 1:
            continue
        yi = y[idx]
        best = None
        # examine max_features random features; keep drawing if none of them splits
        for k, f in enumerate(rng.permutation(m)):
            if k >= max_features and best is not None:
                break
            xf = X[idx, f]
            if n_categories[f]:
                cand = _gini_best_categorical(xf, yi, n_classes, n_categories[f], min_leaf)
            else:
                cand = _gini_best_continuous(xf, yi, n_classes, min_leaf)
            if cand is not None and (best is None or cand[0] < best[0]):
                best = (cand[0], cand[1], f)
        if best is None:
            continue
        _, t, f = best
        is_cat = bool(n_categories[f])
        xf = X[idx, f]
        mask = (xf == t) if is_cat else (xf <= t)
        li, ri = idx[mask], idx[~mask]
        feature[node], threshold[node], categorical[node] = int(f), t, is_cat
        left[node] = new_node(li)
        right[node] = new_node(ri)
        stack.append((right[node], ri, depth + 1))
        stack.append((left[node], li, depth + 1))

    return Tree(
        feature=np.array(feature, dtype=np.int64),
        threshold=np.array(threshold, dtype=float),
        categorical=np.array(categorical, dtype=bool),
        left=np.array(left, dtype=np.int64),
        right=np.array(right, dtype=np.int64),
        counts=np.array(counts, dtype=float).reshape(-1, n_classes),
        depth=tree_depth,
    )


class RandomForest(Classifier):
    """Bagged Gini trees with soft voting (mean of per-tree leaf distributions)."""

    def __init__(self, trees: list[Tree], n_classes: int, n_features: int, params: dict):
        self.trees = list(trees)
        self.n_classes = n_classes
        self.n_features = n_features
        self.params = dict(params)
        self._pack()

    @property
    def n_trees(self) -> int:
        return len(self.trees)

    def _pack(self):
        # all trees as one node table so a batch traverses every tree at once
        offsets = np.cumsum([0] + [t.n_nodes for t in self.trees])
        self._roots = offsets[:-1]
        self._feature = np.concatenate([t.feature for t in self.trees])
        self._threshold = np.concatenate([t.threshold for t in self.trees])
        self._categorical = np.concatenate([t.categorical for t in self.trees])
        self._left = np.concatenate([t.left + o for t, o in zip(self.trees, offsets)])
        self._right = np.concatenate([t.right + o for t, o in zip(self.trees, offsets)])
        counts = np.concatenate([t.counts for t in self.trees])
        self._dist = counts / counts.sum(axis=1, keepdims=True)
        self._depth = max(t.depth for t in self.trees)
        self._safe_feature = np.maximum(self._feature, 0)

    def predict_proba(self, X):
        X = np.asarray(X, dtype=float)
        single = X.ndim == 1
        X = np.atleast_2d(X)
        P = np.zeros((len(X), self.n_classes))
        # chunk rows to bound the (rows x trees) working set
        chunk = max(1, 200_000 // max(1, self.n_trees))
        for s in range(0, len(X), chunk):
            Xc = X[s:s + chunk]
            rows = np.arange(len(Xc))[:, None]
            node = np.broadcast_to(self._roots, (len(Xc), self.n_trees)).copy()
            for _ in range(self._depth):
                x = Xc[rows, self._safe_feature[node]]
                t = self._threshold[node]
                go_left = np.where(self._categorical[node], x == t, x <= t)
                node = np.where(go_left, self._left[node], self._right[node])
            P[s:s + chunk] = self._dist[node].mean(axis=1)
        return P[0] if single else P

    # --- persistence ---------------------------------------------------
    def save(self, path) -> None:
        """Write the forest as a versioned ``.npz`` archive (exact float round-trip)."""
        meta = {"format": FOREST_FORMAT, "version": FOREST_VERSION,
                "n_classes": self.n_classes, "n_features": self.n_features,
                "params": self.params, "depths": [t.depth for t in self.trees],
                "sizes": [t.n_nodes for t in self.trees]}
        arrays = {k: np.concatenate([getattr(t, k) for t in self.trees])
                  for k in ("feature", "threshold", "categorical", "left", "right", "counts")}
        with open(path, "wb") as fh:
            np.savez_compressed(fh, meta=np.array(json.dumps(meta, sort_keys=True)), **arrays)

    @classmethod
    def load(cls, path) -> "RandomForest":
        with np.load(Path(path), allow_pickle=False) as z:
            meta = json.loads(str(z["meta"]))
            if meta.get("format") != FOREST_FORMAT or meta.get("version") != FOREST_VERSION:
                raise ValueError(f"{path}: not a {FOREST_FORMAT} v{FOREST_VERSION} file")
            arrays = {k: z[k] for k in ("feature", "threshold", "categorical", "left", "right", "counts")}
        trees, start = [], 0
        for size, depth in zip(meta["sizes"], meta["depths"]):
            sl = slice(start, start + size)
            trees.append(Tree(**{k: v[sl] for k, v in arrays.items()}, depth=depth))
            start += size
        return cls(trees, meta["n_classes"], meta["n_features"], meta["params"])


def _tree_seed(seed: int, tree_index: int) -> np.random.Generator:
    return np.random.default_rng([seed, tree_index])


def _fit_one(X, y, n_classes, n_categories, max_features, max_depth, min_leaf, seed, i):
    rng = _tree_seed(seed, i)
    boot = rng.integers(0, len(y), size=len(y))
    return _build_tree(X[boot], y[boot], n_classes, n_categories,
                       max_features, max_depth, min_leaf, rng)


def train_random_forest(train: Dataset, n_trees: int = 100, max_depth: int | None = None,
                        min_samples_leaf: int = 1, seed: int = 0, n_jobs: int = 1) -> RandomForest:
    """Fit a forest on ``train``.

    Each tree sees a bootstrap resample of the training set and considers
    ceil(sqrt(m)) random features per split. Tree ``i`` draws all of its
    randomness from ``(seed, i)``, so serial and parallel fits are identical.
    """
    if n_trees < 1 or min_samples_leaf < 1:
        raise ValueError("n_trees and min_samples_leaf must be >= 1")
    if len(train) == 0 or len(np.unique(train.y)) < 2:
        raise SingleClassTraining("training data must contain at least two classes")
    schema = train.schema
    n_categories = [len(f.kind.categories) if f.is_categorical else 0 for f in schema.features]
    max_features = math.ceil(math.sqrt(schema.m))
    args = (np.ascontiguousarray(train.X), train.y, schema.n_classes, n_categories,
            max_features, max_depth, min_samples_leaf, seed)
    if n_jobs == 1:
        trees = [_fit_one(*args, i) for i in range(n_trees)]
    else:
        from joblib import Parallel, delayed
        trees = Parallel(n_jobs=n_jobs)(delayed(_fit_one)(*args, i) for i in range(n_trees))
    params = {"n_trees": n_trees, "max_depth": max_depth,
              "min_samples_leaf": min_samples_leaf, "seed": seed}
    return RandomForest(trees, schema.n_classes, schema.m, params)


def evaluate_accuracy(model: Classifier, test: Dataset) -> float:
    if len(test) == 0:
        raise EmptyTestSet("cannot score an empty test set")
    return float(np.mean(model.predict(test.X) == test.y))
