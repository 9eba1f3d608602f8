"""Seeded synthetic datasets with known structure, for tests and demos."""
from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .dataset import Categorical, Continuous, Dataset, Feature, Schema


def planted(n: int = 600, m: int = 20, informative=(3, 11, 17), seed: int = 0,
            n_categorical: int = 0, n_categories: int = 3) -> Dataset:
    """Uniform features; the class is 1 iff the mean of the informative
    continuous features exceeds 0.5. Remaining features are noise; the last
    ``n_categorical`` features are categorical noise.
    """
    rng = np.random.default_rng(seed)
    informative = list(informative)
    m_cont = m - n_categorical
    if any(i >= m_cont for i in informative):
        raise ValueError("informative features must be continuous")
    feats = [Feature(f"x{i}", Continuous(0.0, 1.0)) for i in range(m_cont)]
    feats += [Feature(f"c{i}", Categorical(tuple(f"v{k}" for k in range(n_categories))))
              for i in range(n_categorical)]
    X = np.hstack([rng.random((n, m_cont)),
                   rng.integers(0, n_categories, (n, n_categorical)).astype(float)])
    y = (X[:, informative].mean(axis=1) > 0.5).astype(int)
    return Dataset(Schema(tuple(feats), "label", ("neg", "pos")), X, y)


def mixed(n: int = 400, seed: int = 0) -> Dataset:
    """Four continuous and three categorical features with an interaction:
    positive when a weighted score plus a category bonus crosses a threshold.
    """
    rng = np.random.default_rng(seed)
    cats = [("red", "green", "blue"), ("a", "b"), ("low", "mid", "high", "top")]
    feats = [Feature(f"num{i}", Continuous(0.0, 1.0)) for i in range(4)]
    feats += [Feature(f"cat{i}", Categorical(c)) for i, c in enumerate(cats)]
    X = np.hstack([rng.random((n, 4)),
                   np.column_stack([rng.integers(0, len(c), n) for c in cats]).astype(float)])
    score = 0.6 * X[:, 0] + 0.4 * X[:, 1] * X[:, 2] + 0.25 * (X[:, 4] == 2) + 0.08 * X[:, 6]
    y = (score > np.median(score)).astype(int)
    return Dataset(Schema(tuple(feats), "label", ("no", "yes")), X, y)


def categorical_only(n: int = 300, m: int = 5, seed: int = 0) -> Dataset:
    rng = np.random.default_rng(seed)
    feats = [Feature(f"k{i}", Categorical(("p", "q", "r", "s"))) for i in range(m)]
    X = rng.integers(0, 4, (n, m)).astype(float)
    y = ((X[:, 0] + X[:, 1] + (X[:, 2] == 3)) >= 4).astype(int)
    return Dataset(Schema(tuple(feats), "label", ("off", "on")), X, y)


def separable_toy(n: int = 20, margin: float = 0.4, seed: int = 0) -> Dataset:
    """Two continuous features; class 0 has x0 < 0.5 - margin/2, class 1 has
    x0 > 0.5 + margin/2."""
    rng = np.random.default_rng(seed)
    half = n // 2
    lo = rng.uniform(0.0, 0.5 - margin / 2, half)
    hi = rng.uniform(0.5 + margin / 2, 1.0, n - half)
    X = np.column_stack([np.concatenate([lo, hi]), rng.random(n)])
    y = np.r_[np.zeros(half, int), np.ones(n - half, int)]
    schema = Schema((Feature("a", Continuous(0.0, 1.0)), Feature("b", Continuous(0.0, 1.0))),
                    "label", ("zero", "one"))
    return Dataset(schema, X, y)


def write_csv(dataset: Dataset, path) -> None:
    """Write ``dataset`` in raw units with a header row."""
    schema = dataset.schema
    with open(Path(path), "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(schema.names + [schema.target])
        for raw, label in zip(dataset.raw(), dataset.y):
            w.writerow([v if isinstance(v, str) else repr(float(v)) for v in raw]
                       + [schema.class_labels[label]])
