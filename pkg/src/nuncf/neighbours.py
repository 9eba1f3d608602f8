"""Nearest unlike neighbour retrieval by exhaustive scan."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import Dataset, distances
from .errors import NoUnlikeNeighbour
from .model import Classifier


@dataclass(frozen=True)
class NunResult:
    nun: np.ndarray
    nun_class: int
    distance: float
    case_index: int


def _candidates(case_base: Dataset, model: Classifier, query_class: int,
                desired_class: int | None, predictions: np.ndarray | None):
    if len(case_base) == 0:
        raise NoUnlikeNeighbour("case base is empty")
    pred = model.predict(case_base.X) if predictions is None else np.asarray(predictions)
    ok = pred != query_class
    if desired_class is not None:
        ok &= pred == desired_class
    idx = np.flatnonzero(ok)
    if len(idx) == 0:
        raise NoUnlikeNeighbour(
            f"no case predicted as a class other than {query_class}"
            + (f" (desired {desired_class})" if desired_class is not None else ""))
    return idx, pred


def find_k_nuns(case_base: Dataset, model: Classifier, query: np.ndarray, query_class: int,
                k: int = 1, desired_class: int | None = None,
                predictions: np.ndarray | None = None) -> list[NunResult]:
    """The ``k`` closest cases whose predicted class differs from ``query_class``.

    Unlike-ness uses the model's prediction for each case, not its stored
    label. ``predictions`` may carry precomputed ``model.predict(case_base.X)``.
    Results are in ascending distance; equal distances keep case-base order.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    idx, pred = _candidates(case_base, model, query_class, desired_class, predictions)
    d = distances(case_base.X[idx], np.asarray(query, dtype=float), case_base.schema)
    order = np.argsort(d, kind="stable")[:k]
    return [NunResult(case_base.X[idx[o]].copy(), int(pred[idx[o]]), float(d[o]), int(idx[o]))
            for o in order]


def find_nun(case_base: Dataset, model: Classifier, query: np.ndarray, query_class: int,
             desired_class: int | None = None,
             predictions: np.ndarray | None = None) -> NunResult:
    idx, pred = _candidates(case_base, model, query_class, desired_class, predictions)
    d = distances(case_base.X[idx], np.asarray(query, dtype=float), case_base.schema)
    o = int(np.argmin(d))   # first minimum -> lowest case index
    return NunResult(case_base.X[idx[o]].copy(), int(pred[idx[o]]), float(d[o]), int(idx[o]))
