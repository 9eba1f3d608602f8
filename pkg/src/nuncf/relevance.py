"""Feature relevance weights: local surrogate (LIME-style), Monte-Carlo Shapley,
global chi-squared, class-level aggregates and a random baseline.

All explainers return one signed weight per feature. Local explainers explain
``target_class``, which defaults to the model's predicted class for the
instance being explained.
"""
from __future__ import annotations

import enum
import math
import threading
from dataclasses import dataclass, replace

import numpy as np

from .dataset import Dataset, distances
from .errors import ClassAbsent, DegenerateRegression, EmptyBackground
from .model import Classifier
from .seeding import derive_seed


class Method(str, enum.Enum):
    LIME = "LIME"
    SHAP = "SHAP"
    CHI2 = "Chi2"
    LIME_C = "LIME_C"
    SHAP_C = "SHAP_C"
    RND = "RND"

    @classmethod
    def parse(cls, name) -> "Method":
        if isinstance(name, cls):
            return name
        for m in cls:
            if m.value.lower() == str(name).lower():
                return m
        raise ValueError(f"unknown relevance method {name!r}")


@dataclass(frozen=True)
class RelevanceWeights:
    weights: np.ndarray
    target_class: int | None
    method: Method

    def __post_init__(self):
        w = np.array(self.weights, dtype=float).reshape(-1)
        if not np.all(np.isfinite(w)):
            raise ValueError("relevance weights must be finite")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    def __len__(self):
        return len(self.weights)


@dataclass(frozen=True)
class ExplainerConfig:
    n_samples: int = 1000
    kernel_width: float | None = None   # None -> 0.75 * sqrt(m)
    background_size: int = 100
    bins: int = 10
    seed: int = 0
    absolute: bool = False              # order by |w| instead of signed w
    class_sample: int | None = None     # cap on members averaged by *_C methods
    lime_weighting: str = "contribution"  # or "slope": order on raw surrogate slopes

    def __post_init__(self):
        if self.n_samples < 1 or self.background_size < 1 or self.bins < 1:
            raise ValueError("sample counts and bins must be >= 1")
        if self.kernel_width is not None and not self.kernel_width > 0:
            raise ValueError("kernel_width must be > 0")
        if self.class_sample is not None and self.class_sample < 1:
            raise ValueError("class_sample must be >= 1")
        if self.lime_weighting not in ("contribution", "slope"):
            raise ValueError("lime_weighting must be 'contribution' or 'slope'")

    def width(self, m: int) -> float:
        return self.kernel_width if self.kernel_width is not None else 0.75 * math.sqrt(m)


def _target(model: Classifier, instance: np.ndarray, target_class) -> int:
    return int(model.predict(instance)) if target_class is None else int(target_class)


def lime_perturbations(train: Dataset, instance: np.ndarray, n: int,
                       rng: np.random.Generator) -> np.ndarray:
    """Neighbourhood sample around ``instance``; row 0 is the instance itself."""
    cat = train.schema.categorical_mask
    Z = np.tile(np.asarray(instance, dtype=float), (n, 1))
    cont = np.flatnonzero(~cat)
    if len(cont):
        std = train.X[:, cont].std(axis=0)
        Z[:, cont] = np.clip(Z[:, cont] + rng.standard_normal((n, len(cont))) * std, 0.0, 1.0)
    for j in np.flatnonzero(cat):
        flip = rng.random(n) < 0.5
        Z[flip, j] = rng.choice(train.X[:, j], size=int(flip.sum()))
    Z[0] = instance
    return Z


def lime_explain(model: Classifier, train: Dataset, instance: np.ndarray,
                 config: ExplainerConfig = ExplainerConfig(),
                 target_class: int | None = None) -> RelevanceWeights:
    """Weighted least-squares surrogate fitted on perturbations of ``instance``.

    Continuous features enter the surrogate as their normalised values;
    categorical features as the indicator "equals the instance's category".
    The returned weights are the surrogate's slope coefficients.
    """
    if len(train) == 0:
        raise ValueError("training data is empty")
    instance = np.asarray(instance, dtype=float)
    schema = train.schema
    target = _target(model, instance, target_class)
    rng = np.random.default_rng(config.seed)

    Z = lime_perturbations(train, instance, config.n_samples, rng)
    labels = model.predict_proba(Z)[:, target]
    d = distances(Z, instance, schema)
    sw = np.exp(-(d ** 2) / config.width(schema.m) ** 2)

    design = Z.copy()
    cat = schema.categorical_mask
    design[:, cat] = (Z[:, cat] == instance[cat]).astype(float)

    # weighted centring absorbs the intercept
    wsum = sw.sum()
    design -= (sw @ design) / wsum
    labels = labels - (sw @ labels) / wsum
    active = np.flatnonzero(np.ptp(design, axis=0) > 0)
    coef = np.zeros(schema.m)
    if len(active):
        root = np.sqrt(sw)[:, None]
        A = design[:, active] * root
        b = labels * root[:, 0]
        sol, _, rank, _ = np.linalg.lstsq(A, b, rcond=None)
        if rank < len(active):
            raise DegenerateRegression(
                f"surrogate design has rank {rank} < {len(active)}; "
                "increase n_samples")
        coef[active] = sol
    return RelevanceWeights(coef, target, Method.LIME)


def lime_contributions(weights: RelevanceWeights, instance: np.ndarray,
                       train: Dataset) -> RelevanceWeights:
    """Turn surrogate slopes into per-value contributions.

    A continuous slope only says which direction raises the target
    probability; ``slope * (x - training mean)`` says how much the instance's
    own value pushes towards the target. Categorical weights are already
    indicator effects of the instance's category and pass through.
    """
    cat = train.schema.categorical_mask
    shift = np.asarray(instance, dtype=float) - train.X.mean(axis=0)
    w = np.where(cat, weights.weights, weights.weights * shift)
    return RelevanceWeights(w, weights.target_class, weights.method)


def shap_explain(model: Classifier, train: Dataset, instance: np.ndarray,
                 config: ExplainerConfig = ExplainerConfig(),
                 target_class: int | None = None,
                 background: np.ndarray | None = None) -> RelevanceWeights:
    """Permutation-sampling Shapley values of the fixed model.

    Each of ``n_samples`` iterations draws a feature permutation and one
    background row, then switches features from background to instance value
    in permutation order; a feature's weight is its mean probability delta.
    ``background`` overrides the seeded sample drawn from ``train``.
    """
    instance = np.asarray(instance, dtype=float)
    m = len(instance)
    target = _target(model, instance, target_class)
    rng = np.random.default_rng(config.seed)
    if background is None:
        if len(train) == 0:
            raise EmptyBackground("no training rows to draw a background from")
        k = min(config.background_size, len(train))
        background = train.X[rng.choice(len(train), size=k, replace=False)]
    background = np.atleast_2d(np.asarray(background, dtype=float))
    if len(background) == 0:
        raise EmptyBackground("background sample is empty")

    T = config.n_samples
    perms = np.argsort(rng.random((T, m)), axis=1)
    rank = np.argsort(perms, axis=1)                 # position of each feature
    base = background[rng.integers(0, len(background), size=T)]
    steps = np.arange(m + 1)[None, :, None]
    Z = np.where(rank[:, None, :] < steps, instance, base[:, None, :])   # (T, m+1, m)
    P = model.predict_proba(Z.reshape(-1, m))[:, target].reshape(T, m + 1)
    delta = np.diff(P, axis=1)                       # delta[t, k] belongs to perms[t, k]
    phi = np.take_along_axis(delta, rank, axis=1).mean(axis=0)
    return RelevanceWeights(phi, target, Method.SHAP)


def chi2_weights(train: Dataset, bins: int = 10) -> RelevanceWeights:
    """Chi-squared statistic of each feature against the class.

    Continuous features are cut into ``bins`` equal-width bins over [0, 1].
    Empty rows/columns of a contingency table are dropped before testing.
    """
    schema = train.schema
    K = schema.n_classes
    stats = np.zeros(schema.m)
    for j, f in enumerate(schema.features):
        col = train.X[:, j]
        if f.is_categorical:
            codes, levels = col.astype(np.int64), len(f.kind.categories)
        else:
            codes, levels = np.minimum((col * bins).astype(np.int64), bins - 1), bins
        table = np.bincount(codes * K + train.y, minlength=levels * K).reshape(levels, K)
        table = table[table.sum(axis=1) > 0][:, table.sum(axis=0) > 0].astype(float)
        if table.size == 0:
            continue
        expected = np.outer(table.sum(axis=1), table.sum(axis=0)) / table.sum()
        stats[j] = ((table - expected) ** 2 / expected).sum()
    return RelevanceWeights(stats, None, Method.CHI2)


def random_weights(m: int, seed: int) -> RelevanceWeights:
    """Weights whose ordering is a seeded random permutation of the features."""
    perm = np.random.default_rng(seed).permutation(m)
    w = np.empty(m)
    w[perm] = np.arange(m, 0, -1, dtype=float)
    return RelevanceWeights(w, None, Method.RND)


class AggregateCache:
    """Per-(method, class) store for class-level weights; thread-safe."""

    def __init__(self):
        self._store: dict = {}
        self._lock = threading.Lock()

    def get(self, key):
        with self._lock:
            return self._store.get(key)

    def put(self, key, value):
        with self._lock:
            return self._store.setdefault(key, value)


def class_aggregate(method: Method, model: Classifier, train: Dataset, cls: int,
                    config: ExplainerConfig = ExplainerConfig(),
                    cache: AggregateCache | None = None) -> RelevanceWeights:
    """Mean local weights over the training instances labelled ``cls``.

    Every member is explained with respect to ``cls`` and with its own derived
    seed; LIME members are averaged as contributions unless
    ``config.lime_weighting == "slope"``. ``config.class_sample`` caps the number of members (seeded subset).
    """
    method = Method.parse(method)
    base = {Method.LIME: Method.LIME, Method.LIME_C: Method.LIME,
            Method.SHAP: Method.SHAP, Method.SHAP_C: Method.SHAP}.get(method)
    if base is None:
        raise ValueError(f"class aggregation needs LIME or SHAP, got {method.value}")
    key = (base, int(cls))
    if cache is not None and (hit := cache.get(key)) is not None:
        return hit

    members = np.flatnonzero(train.y == cls)
    if len(members) == 0:
        raise ClassAbsent(f"class {cls} has no training instances")
    if config.class_sample is not None and len(members) > config.class_sample:
        rng = np.random.default_rng(derive_seed(config.seed, "class_sample", int(cls)))
        members = np.sort(rng.choice(members, size=config.class_sample, replace=False))
    total = np.zeros(train.schema.m)
    for i in members:
        cfg = replace(config, seed=derive_seed(config.seed, "aggregate", int(i)))
        if base is Method.SHAP:
            w = shap_explain(model, train, train.X[i], cfg, target_class=int(cls))
        else:
            w = lime_explain(model, train, train.X[i], cfg, target_class=int(cls))
            if config.lime_weighting == "contribution":
                w = lime_contributions(w, train.X[i], train)
        total += w.weights
    out = RelevanceWeights(total / len(members), int(cls),
                           Method.LIME_C if base is Method.LIME else Method.SHAP_C)
    return cache.put(key, out) if cache is not None else out


def order_features(weights: RelevanceWeights | np.ndarray, absolute: bool = False) -> list[int]:
    """Feature indices by descending weight; ties go to the lower index."""
    w = weights.weights if isinstance(weights, RelevanceWeights) else np.asarray(weights, dtype=float)
    key = np.abs(w) if absolute else w
    return [int(i) for i in np.lexsort((np.arange(len(w)), -key))]
