from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import chi2_contingency

from conftest import linear_model
from oracles import chi2_statistic, exact_shapley
from nuncf import synthetic
from nuncf.dataset import Categorical, Continuous, Dataset, Feature, Schema
from nuncf.errors import ClassAbsent, EmptyBackground
from nuncf.model import FunctionClassifier
from nuncf.relevance import (
    AggregateCache,
    ExplainerConfig,
    Method,
    RelevanceWeights,
    chi2_weights,
    class_aggregate,
    lime_contributions,
    lime_explain,
    lime_perturbations,
    order_features,
    random_weights,
    shap_explain,
)
from nuncf.seeding import derive_seed


def uniform(n, m, seed=0, categorical=()):
    rng = np.random.default_rng(seed)
    feats = tuple(Feature(f"c{j}", Categorical(("a", "b", "c"))) if j in categorical
                  else Feature(f"x{j}", Continuous(0, 1)) for j in range(m))
    X = rng.random((n, m))
    for j in categorical:
        X[:, j] = rng.integers(0, 3, n)
    return Dataset(Schema(feats, "y", ("n", "p")), X, rng.integers(0, 2, n))


def f1(model):
    """Class-1 probability of ``model`` as a scalar function for the oracles."""
    return lambda z: float(model.predict_proba(np.asarray(z))[1])


# ---------------------------------------------------------------- LIME

def test_lime_linear_black_box():
    train = uniform(300, 2)
    model = FunctionClassifier(lambda X: np.column_stack([1 - X[:, 0], X[:, 0]]), 2)
    w = lime_explain(model, train, np.array([0.8, 0.4]))
    assert w.target_class == 1
    assert w.weights[0] > 0
    assert abs(w.weights[0]) >= 10 * abs(w.weights[1])


def test_lime_constant_model_gives_zero():
    train = uniform(200, 3, categorical=(2,))
    model = FunctionClassifier(lambda X: np.tile([0.3, 0.7], (len(X), 1)), 2)
    w = lime_explain(model, train, train.X[0])
    assert np.all(np.abs(w.weights) <= 1e-6)


def test_lime_is_deterministic_per_seed():
    train = uniform(200, 4, categorical=(1,))
    model = linear_model([0.3, 0.0, -0.2, 0.1])
    cfg = ExplainerConfig(n_samples=300, seed=5)
    a = lime_explain(model, train, train.X[3], cfg).weights
    b = lime_explain(model, train, train.X[3], cfg).weights
    assert np.array_equal(a, b)


def test_lime_perturbations_contract():
    train = uniform(100, 3, categorical=(1,))
    x = train.X[0]
    Z = lime_perturbations(train, x, 500, np.random.default_rng(0))
    assert np.array_equal(Z[0], x)
    assert Z[:, [0, 2]].min() >= 0 and Z[:, [0, 2]].max() <= 1
    assert set(np.unique(Z[:, 1])) <= {0.0, 1.0, 2.0}
    # roughly half the categorical cells are resampled (and some keep the value anyway)
    assert 0.5 < np.mean(Z[:, 1] == x[1]) < 0.85


def test_lime_target_class_override_flips_sign():
    train = uniform(300, 2)
    model = linear_model([0.4, 0.0])
    x = np.array([0.8, 0.5])
    w1 = lime_explain(model, train, x, target_class=1).weights
    w0 = lime_explain(model, train, x, target_class=0).weights
    assert np.allclose(w0, -w1, atol=1e-9)


def test_lime_contributions():
    train = uniform(100, 2, categorical=(1,))
    w = RelevanceWeights([2.0, 0.7], 1, Method.LIME)
    x = np.array([train.X[:, 0].mean() + 0.25, 2.0])
    c = lime_contributions(w, x, train)
    assert np.allclose(c.weights, [0.5, 0.7])


# ---------------------------------------------------------------- SHAP

def test_shap_additive_example():
    train = uniform(50, 2)
    model = linear_model([0.5, 0.5])
    w = shap_explain(model, train, np.array([1.0, 1.0]), background=np.zeros((1, 2)))
    assert w.target_class == 1
    assert np.allclose(w.weights, [0.5, 0.5], atol=0.05)


def test_shap_dummy_feature():
    train = uniform(200, 3)
    model = FunctionClassifier(
        lambda X: np.column_stack([1 - X[:, 0] * X[:, 2], X[:, 0] * X[:, 2]]), 2)
    w = shap_explain(model, train, np.array([0.9, 0.1, 0.8]), target_class=1)
    assert abs(w.weights[1]) <= 0.02


def _interaction_model():
    def fn(X):
        p = 0.2 + 0.3 * X[:, 0] * X[:, 1] + 0.2 * X[:, 2] ** 2 + 0.1 * X[:, 3]
        return np.column_stack([1 - p, p])
    return FunctionClassifier(fn, 2)


def test_exact_shapley_oracle_efficiency():
    model = _interaction_model()
    rng = np.random.default_rng(1)
    bg = rng.random((6, 4))
    x = rng.random(4)
    phi = exact_shapley(f1(model), x, bg)
    expected = f1(model)(x) - np.mean([f1(model)(b) for b in bg])
    assert abs(sum(phi) - expected) <= 1e-9


def test_shap_monte_carlo_matches_exact():
    model = _interaction_model()
    rng = np.random.default_rng(2)
    train = uniform(300, 4, seed=3)
    x = rng.random(4)
    cfg = ExplainerConfig(n_samples=4000, background_size=20, seed=4)
    bg = train.X[np.random.default_rng(0).choice(300, 20, replace=False)]
    mc = shap_explain(model, train, x, cfg, target_class=1, background=bg).weights
    exact = exact_shapley(f1(model), x, bg)
    assert np.max(np.abs(mc - exact)) <= 0.05
    eff = f1(model)(x) - model.predict_proba(bg)[:, 1].mean()
    assert abs(mc.sum() - eff) <= 0.05


def test_shap_efficiency_is_exact_per_permutation():
    # each permutation walk telescopes, so the MC sum equals the mean endpoint gap
    model = _interaction_model()
    train = uniform(100, 4)
    bg = np.zeros((1, 4))
    x = np.array([0.9, 0.8, 0.7, 0.6])
    w = shap_explain(model, train, x, ExplainerConfig(n_samples=50), 1, background=bg)
    assert w.weights.sum() == pytest.approx(f1(model)(x) - f1(model)(bg[0]), abs=1e-12)


def test_shap_symmetry():
    model = FunctionClassifier(
        lambda X: np.column_stack([1 - X[:, 0] * X[:, 1], X[:, 0] * X[:, 1]]), 2)
    train = uniform(200, 2)
    w = shap_explain(model, train, np.array([0.9, 0.9]), ExplainerConfig(n_samples=3000),
                     target_class=1, background=np.full((1, 2), 0.1))
    assert abs(w.weights[0] - w.weights[1]) <= 0.02


def test_shap_empty_background():
    train = uniform(10, 2)
    with pytest.raises(EmptyBackground):
        shap_explain(linear_model([0.1, 0.1]), train, train.X[0], background=np.zeros((0, 2)))
    with pytest.raises(EmptyBackground):
        shap_explain(linear_model([0.1, 0.1]), train.subset([]), train.X[0])


def test_shap_deterministic():
    train = uniform(100, 3)
    model = linear_model([0.2, -0.1, 0.3])
    a = shap_explain(model, train, train.X[0], ExplainerConfig(seed=8)).weights
    b = shap_explain(model, train, train.X[0], ExplainerConfig(seed=8)).weights
    assert np.array_equal(a, b)


# ---------------------------------------------------------------- Chi2

def _binary_feature_data(col, y):
    schema = Schema((Feature("f", Categorical(("0", "1"))),), "y", ("n", "p"))
    return Dataset(schema, np.asarray(col, float)[:, None], y)


def test_chi2_perfect_association_is_n():
    y = np.array([0] * 50 + [1] * 50)
    assert chi2_weights(_binary_feature_data(y, y)).weights[0] == pytest.approx(100.0)


def test_chi2_constant_feature_is_zero():
    y = np.array([0] * 50 + [1] * 50)
    assert chi2_weights(_binary_feature_data(np.zeros(100), y)).weights[0] == 0.0


def test_chi2_matches_oracle_and_scipy():
    ds = synthetic.mixed(300, seed=4)
    w = chi2_weights(ds, bins=10).weights
    cat = ds.schema.categorical_mask
    for j in range(ds.schema.m):
        col = ds.X[:, j]
        codes = col.astype(int) if cat[j] else np.minimum((col * 10).astype(int), 9)
        assert w[j] == pytest.approx(chi2_statistic(codes.tolist(), ds.y.tolist()), rel=1e-9)
        table = np.zeros((codes.max() + 1, 2))
        np.add.at(table, (codes, ds.y), 1)
        table = table[table.sum(axis=1) > 0]
        assert w[j] == pytest.approx(chi2_contingency(table, correction=False)[0], rel=1e-9)


def test_chi2_row_order_invariant_and_global():
    ds = synthetic.mixed(200, seed=5)
    perm = np.random.default_rng(0).permutation(len(ds))
    a = chi2_weights(ds).weights
    assert np.allclose(a, chi2_weights(ds.subset(perm)).weights, rtol=1e-12)
    assert np.all(a >= 0)


# ---------------------------------------------------------------- aggregates

def _two_member_train():
    schema = Schema((Feature("a", Continuous(0, 1)), Feature("b", Continuous(0, 1))), "y", ("n", "p"))
    return Dataset(schema, [[1.0, 0.0], [0.0, 1.0], [0.5, 0.5]], [1, 1, 0])


def test_class_aggregate_is_mean_of_member_weights():
    train = _two_member_train()
    model = linear_model([0.5, 0.5])
    cfg = ExplainerConfig(n_samples=20, background_size=2)
    agg = class_aggregate(Method.SHAP, model, train, 1, cfg)
    direct = [shap_explain(model, train, train.X[i],
                           replace(cfg, seed=derive_seed(0, "aggregate", i)),
                           target_class=1).weights for i in (0, 1)]
    assert np.allclose(agg.weights, np.mean(direct, axis=0), rtol=0, atol=1e-15)
    assert agg.method is Method.SHAP_C and agg.target_class == 1


def test_class_aggregate_two_member_arithmetic():
    # a surrogate fitted to an exactly linear model recovers its slopes for any seed,
    # so the contributions of the members are slope * (x - train mean) = [1, 0] and [0, 1]
    schema = Schema((Feature("a", Continuous(0, 1)), Feature("b", Continuous(0, 1))), "y", ("n", "p"))
    train = Dataset(schema, [[1.0, 0.0], [0.0, 1.0], [0.5, 0.5], [0.5, 0.5]], [1, 1, 0, 0])
    model = linear_model([0.25, 0.25])
    w = class_aggregate(Method.LIME, model, train, 1, ExplainerConfig(n_samples=200))
    assert np.allclose(w.weights, [0.0, 0.0], atol=1e-9)   # 0.25 * ([.5,-.5] + [-.5,.5]) / 2
    slopes = class_aggregate(Method.LIME, model, train, 1,
                             ExplainerConfig(n_samples=200, lime_weighting="slope"))
    assert np.allclose(slopes.weights, [0.25, 0.25], atol=1e-9)


def test_class_aggregate_single_member_and_cache():
    schema = Schema((Feature("a", Continuous(0, 1)), Feature("b", Continuous(0, 1))), "y", ("n", "p"))
    train = Dataset(schema, [[0.9, 0.2], [0.1, 0.5], [0.3, 0.4]], [1, 0, 0])
    model = linear_model([0.3, 0.2])
    cfg = ExplainerConfig(n_samples=50, background_size=3)
    one = shap_explain(model, train, train.X[0], replace(cfg, seed=derive_seed(0, "aggregate", 0)),
                       target_class=1)
    cache = AggregateCache()
    agg = class_aggregate("SHAP_C", model, train, 1, cfg, cache=cache)
    assert np.array_equal(agg.weights, one.weights)
    assert class_aggregate(Method.SHAP, model, train, 1, cfg, cache=cache) is agg
    with pytest.raises(ClassAbsent):
        class_aggregate(Method.LIME, model, train.subset([1, 2]), 1, cfg)


def test_class_aggregate_member_order_invariant():
    # exact surrogate recovery makes every member's weights seed-free
    train = uniform(30, 3, seed=6)
    model = linear_model([0.2, 0.1, -0.3])
    cfg = ExplainerConfig(n_samples=100)
    a = class_aggregate(Method.LIME, model, train, 1, cfg).weights
    rev = train.subset(np.arange(len(train))[::-1])
    b = class_aggregate(Method.LIME, model, rev, 1, cfg).weights
    assert np.allclose(a, b, rtol=0, atol=1e-9)


def test_class_sample_caps_members():
    train = uniform(40, 2, seed=1)
    model = linear_model([0.2, 0.1])
    full = class_aggregate(Method.LIME, model, train, 1, ExplainerConfig(n_samples=60,
                                                                      lime_weighting="slope"))
    capped = class_aggregate(Method.LIME, model, train, 1,
                             ExplainerConfig(n_samples=60, lime_weighting="slope", class_sample=3))
    assert np.allclose(full.weights, capped.weights, atol=1e-9)


def test_class_aggregate_rejects_global_methods():
    train = _two_member_train()
    with pytest.raises(ValueError):
        class_aggregate(Method.CHI2, linear_model([0.1, 0.1]), train, 1)


# ---------------------------------------------------------------- ordering

def test_order_examples():
    assert order_features(np.array([0.1, 0.9, -0.3])) == [1, 0, 2]
    assert order_features(np.zeros(5)) == [0, 1, 2, 3, 4]
    assert order_features(np.array([0.1, 0.9, -0.3]), absolute=True) == [1, 2, 0]


@given(st.lists(st.integers(-3, 3).map(float), min_size=1, max_size=12), st.randoms())
@settings(max_examples=200, deadline=None)
def test_order_is_permutation_and_equivariant(w, rnd):
    w = np.array(w)
    order = order_features(w)
    assert sorted(order) == list(range(len(w)))
    assert all(w[a] > w[b] or (w[a] == w[b] and a < b) for a, b in zip(order, order[1:]))
    perm = list(range(len(w)))
    rnd.shuffle(perm)
    permuted = order_features(w[perm])
    # compare as weight sequences: equal weights may swap positions under the tie-break
    assert np.array_equal(w[order], w[perm][permuted])
    if len(set(w)) == len(w):
        assert [perm[i] for i in permuted] == order


def test_random_weights_are_seeded_permutations():
    a, b = random_weights(7, 3), random_weights(7, 3)
    assert np.array_equal(a.weights, b.weights)
    assert sorted(order_features(a)) == list(range(7))
    assert any(not np.array_equal(random_weights(7, s).weights, a.weights) for s in range(4, 10))


def test_method_parse():
    assert Method.parse("chi2") is Method.CHI2
    assert Method.parse(Method.LIME_C) is Method.LIME_C
    with pytest.raises(ValueError):
        Method.parse("tree")


def test_relevance_weights_reject_nonfinite():
    with pytest.raises(ValueError):
        RelevanceWeights([0.0, np.nan], 0, Method.LIME)


def test_config_invariants():
    for bad in ({"n_samples": 0}, {"kernel_width": 0.0}, {"bins": 0}, {"background_size": 0}):
        with pytest.raises(ValueError):
            ExplainerConfig(**bad)
