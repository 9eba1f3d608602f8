"""Counterfactual explanations from nearest unlike neighbours, guided by
feature relevance weights."""

__version__ = "0.1.0"

from .counterfactual import (  # noqa: E402
    CounterfactualEngine,
    CounterfactualResult,
    OrderingMode,
    explain_query,
    substitute,
)
from .dataset import Categorical, Continuous, Dataset, Feature, Schema, distance, load_csv  # noqa: E402
from .metrics import MetricsReport, compute_metrics  # noqa: E402
from .model import Classifier, RandomForest, evaluate_accuracy, train_random_forest  # noqa: E402
from .neighbours import NunResult, find_k_nuns, find_nun  # noqa: E402
from .relevance import ExplainerConfig, Method, RelevanceWeights, order_features  # noqa: E402
from .textgen import render  # noqa: E402
