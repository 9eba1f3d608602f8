"""Greedy NUN substitution: copy neighbour values into the query, most relevant
feature first, until the classifier's decision changes.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace

import numpy as np

from .dataset import Dataset, Schema
from .errors import AlreadyDesiredClass, NoFlip
from .model import Classifier
from .neighbours import NunResult, find_nun
from .relevance import (
    AggregateCache,
    ExplainerConfig,
    Method,
    RelevanceWeights,
    chi2_weights,
    class_aggregate,
    lime_contributions,
    lime_explain,
    order_features,
    random_weights,
    shap_explain,
)


class OrderingMode(str, enum.Enum):
    QREL = "qrel"   # weights explain the query
    NREL = "nrel"   # weights explain the NUN
    NULL = "null"   # weights tied to neither (random or global orderings)

    @classmethod
    def parse(cls, name) -> "OrderingMode":
        if isinstance(name, cls):
            return name
        try:
            return cls(str(name).lower())
        except ValueError:
            raise ValueError(f"unknown ordering mode {name!r}") from None


@dataclass(frozen=True)
class Change:
    feature: int
    old: float
    new: float


@dataclass(frozen=True)
class CounterfactualResult:
    counterfactual: np.ndarray
    query_class: int
    new_class: int
    changed_features: tuple[Change, ...]
    amount: float
    nun_used: NunResult
    order: tuple[int, ...] = field(default=(), repr=False)

    @property
    def n_changes(self) -> int:
        return len(self.changed_features)


def normalize_cell(method: Method, mode: OrderingMode) -> tuple[Method, OrderingMode]:
    """Canonical (method, mode) pair: global or random orderings carry no instance."""
    method, mode = Method.parse(method), OrderingMode.parse(mode)
    if method is Method.CHI2:
        return method, OrderingMode.QREL
    if method is Method.RND:
        return method, OrderingMode.NULL
    if mode is OrderingMode.NULL:
        raise ValueError(f"{method.value} needs mode qrel or nrel")
    return method, mode


def substitute(query: np.ndarray, query_class: int, nun: NunResult, model: Classifier,
            weights: RelevanceWeights, schema: Schema, absolute: bool = False,
            desired_class: int | None = None) -> CounterfactualResult:
    """Copy NUN values into the query in relevance order until the prediction flips.

    Features where the query already matches the NUN are skipped. A flip is
    any class other than ``query_class`` or, when ``desired_class`` is given,
    that class specifically.
    """
    x = np.array(query, dtype=float)
    target = np.asarray(nun.nun, dtype=float)
    cat = schema.categorical_mask
    order = order_features(weights, absolute=absolute)
    changes, amount = [], 0.0
    y = query_class
    for i in order:
        if x[i] == target[i]:
            continue
        changes.append(Change(i, float(x[i]), float(target[i])))
        amount += 1.0 if cat[i] else abs(target[i] - x[i])
        x[i] = target[i]
        y = model.predict(x)
        if (y != query_class) if desired_class is None else (y == desired_class):
            x.setflags(write=False)
            return CounterfactualResult(x, int(query_class), int(y), tuple(changes),
                                        float(amount), nun, tuple(order))
    raise NoFlip(f"query became the NUN (case {nun.case_index}) without a class change; "
                 "the NUN must be predicted as an unlike class")


class CounterfactualEngine:
    """Query-level composition: predict, retrieve NUN, weigh, substitute.

    Holds the case base, the model and the caches shared across queries
    (case-base predictions, class-level weights, global chi-squared weights).
    """

    def __init__(self, case_base: Dataset, model: Classifier,
                 config: ExplainerConfig = ExplainerConfig(), train: Dataset | None = None):
        self.case_base = case_base
        self.train = case_base if train is None else train
        self.model = model
        self.config = config
        self.schema = case_base.schema
        self.case_predictions = np.asarray(model.predict(case_base.X))
        self._aggregates = AggregateCache()
        self._chi2 = None

    def nun(self, query, query_class, desired_class=None) -> NunResult:
        return find_nun(self.case_base, self.model, query, query_class, desired_class,
                        predictions=self.case_predictions)

    def weights(self, method: Method, instance: np.ndarray, instance_class: int,
                seed: int) -> RelevanceWeights:
        cfg = replace(self.config, seed=seed)
        if method is Method.LIME:
            w = lime_explain(self.model, self.train, instance, cfg)
            if self.config.lime_weighting == "contribution":
                w = lime_contributions(w, instance, self.train)
            return w
        if method is Method.SHAP:
            return shap_explain(self.model, self.train, instance, cfg)
        if method in (Method.LIME_C, Method.SHAP_C):
            return class_aggregate(method, self.model, self.train, instance_class,
                                   self.config, cache=self._aggregates)
        if method is Method.CHI2:
            if self._chi2 is None:
                self._chi2 = chi2_weights(self.train, bins=self.config.bins)
            return self._chi2
        if method is Method.RND:
            return random_weights(self.schema.m, seed)
        raise ValueError(method)

    def explain(self, query: np.ndarray, method, mode, desired_class: int | None = None,
                seed: int | None = None, nun: NunResult | None = None) -> CounterfactualResult:
        method, mode = normalize_cell(method, mode)
        seed = self.config.seed if seed is None else seed
        query = np.asarray(query, dtype=float)
        query_class = int(self.model.predict(query))
        if desired_class is not None and query_class == desired_class:
            raise AlreadyDesiredClass(
                f"query is already predicted as {self.schema.class_labels[desired_class]!r}")
        if nun is None:
            nun = self.nun(query, query_class, desired_class)
        if mode is OrderingMode.NREL:
            w = self.weights(method, nun.nun, nun.nun_class, seed)
        else:
            w = self.weights(method, query, query_class, seed)
        return substitute(query, query_class, nun, self.model, w, self.schema,
                       absolute=self.config.absolute, desired_class=desired_class)


def explain_query(case_base: Dataset, model: Classifier, query: np.ndarray, method, mode,
                  config: ExplainerConfig = ExplainerConfig(),
                  desired_class: int | None = None) -> CounterfactualResult:
    """One-shot convenience wrapper around :class:`CounterfactualEngine`."""
    return CounterfactualEngine(case_base, model, config).explain(
        query, method, mode, desired_class=desired_class)
