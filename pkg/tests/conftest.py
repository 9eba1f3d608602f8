import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from nuncf import synthetic
from nuncf.dataset import split
from nuncf.model import FunctionClassifier, train_random_forest


@pytest.fixture(scope="session")
def mixed_split():
    return split(synthetic.mixed(400, seed=1), 0.3, seed=1)


@pytest.fixture(scope="session")
def mixed_forest(mixed_split):
    train, _ = mixed_split
    return train_random_forest(train, n_trees=25, min_samples_leaf=2, seed=3)


def linear_model(coef, n_classes=2):
    """P(class 1) = 0.5 + sum coef_i (x_i - 0.5); valid when sum |coef| <= 1."""
    coef = np.asarray(coef, dtype=float)

    def fn(X):
        p1 = 0.5 + (X - 0.5) @ coef
        return np.column_stack([1 - p1, p1])

    return FunctionClassifier(fn, n_classes)


_ACCEPTANCE: list[str] = []


@pytest.fixture
def criterion():
    """Record one PASS/FAIL line per acceptance criterion, then assert it."""

    def check(label: str, ok: bool, detail: str):
        line = f"{'PASS' if ok else 'FAIL'}  {label}: {detail}"
        _ACCEPTANCE.append(line)
        print(line)
        assert ok, line

    return check


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE:
            terminalreporter.write_line(line)
