"""Typed tabular data: schema, CSV ingestion, normalisation, splitting and the
mixed Euclidean/overlap distance used by every downstream module.

Instances live in *normalised space*: continuous features are min/max scaled
to [0, 1] and categorical features hold the integer index of their category
(stored as float so a whole dataset fits one ``float64`` matrix).
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence, Union

import numpy as np

from .errors import (
    ClassTooSmall,
    EmptyFile,
    MissingColumn,
    SchemaError,
    TargetNotFound,
    UnknownCategory,
    UnparsableValue,
)

PathLike = Union[str, Path]

SCHEMA_FORMAT = "nuncf-schema"
SCHEMA_VERSION = 1


@dataclass(frozen=True)
class Continuous:
    min: float
    max: float

    def __post_init__(self):
        if not (math.isfinite(self.min) and math.isfinite(self.max)):
            raise SchemaError("continuous bounds must be finite")
        if self.min > self.max:
            raise SchemaError(f"min {self.min} > max {self.max}")

    @property
    def span(self) -> float:
        return self.max - self.min

    def normalize(self, value: float) -> float:
        if self.span == 0:
            return 0.0
        return min(1.0, max(0.0, (value - self.min) / self.span))

    def denormalize(self, value: float) -> float:
        return self.min + value * self.span


@dataclass(frozen=True)
class Categorical:
    categories: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "categories", tuple(self.categories))
        if not self.categories:
            raise SchemaError("categorical feature needs at least one category")
        if len(set(self.categories)) != len(self.categories):
            raise SchemaError(f"duplicate categories in {self.categories}")

    def index(self, name: str) -> int:
        return self.categories.index(name)

    def name(self, index: float) -> str:
        return self.categories[int(index)]


FeatureKind = Union[Continuous, Categorical]


@dataclass(frozen=True)
class Feature:
    name: str
    kind: FeatureKind

    @property
    def is_categorical(self) -> bool:
        return isinstance(self.kind, Categorical)


@dataclass(frozen=True)
class Schema:
    features: tuple[Feature, ...]
    target: str
    class_labels: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "features", tuple(self.features))
        object.__setattr__(self, "class_labels", tuple(self.class_labels))
        names = [f.name for f in self.features]
        if not names:
            raise SchemaError("schema needs at least one feature")
        if len(set(names)) != len(names):
            raise SchemaError("feature names must be unique")
        if self.target in names:
            raise SchemaError(f"target {self.target!r} is also a feature")
        if len(self.class_labels) < 2:
            raise SchemaError("need at least two class labels")
        if len(set(self.class_labels)) != len(self.class_labels):
            raise SchemaError("class labels must be unique")

    @property
    def names(self) -> list[str]:
        return [f.name for f in self.features]

    @property
    def m(self) -> int:
        return len(self.features)

    @property
    def n_classes(self) -> int:
        return len(self.class_labels)

    @property
    def categorical_mask(self) -> np.ndarray:
        return np.array([f.is_categorical for f in self.features], dtype=bool)

    def class_index(self, label: str) -> int:
        try:
            return self.class_labels.index(label)
        except ValueError:
            raise SchemaError(f"unknown class label {label!r}") from None

    def validate(self, x: np.ndarray) -> None:
        """Raise SchemaError unless ``x`` is a well-formed normalised instance."""
        x = np.asarray(x, dtype=float)
        if x.shape != (self.m,):
            raise SchemaError(f"instance has shape {x.shape}, expected ({self.m},)")
        for v, f in zip(x, self.features):
            if isinstance(f.kind, Categorical):
                if v != int(v) or not 0 <= v < len(f.kind.categories):
                    raise SchemaError(f"{f.name}: invalid category index {v}")
            elif not 0.0 <= v <= 1.0:
                raise SchemaError(f"{f.name}: normalised value {v} outside [0, 1]")

    def encode(self, raw: Sequence) -> np.ndarray:
        """Raw feature values (numbers / category names) to a normalised instance."""
        out = np.empty(self.m)
        for i, (v, f) in enumerate(zip(raw, self.features)):
            if isinstance(f.kind, Categorical):
                out[i] = f.kind.index(str(v))
            else:
                out[i] = f.kind.normalize(float(v))
        return out

    def decode(self, x: np.ndarray) -> list:
        return [
            f.kind.name(v) if isinstance(f.kind, Categorical) else f.kind.denormalize(v)
            for v, f in zip(x, self.features)
        ]

    # --- serialisation -------------------------------------------------
    def to_dict(self) -> dict:
        feats = []
        for f in self.features:
            if isinstance(f.kind, Categorical):
                feats.append({"name": f.name, "kind": "categorical",
                              "categories": list(f.kind.categories)})
            else:
                feats.append({"name": f.name, "kind": "continuous",
                              "min": f.kind.min, "max": f.kind.max})
        return {
            "format": SCHEMA_FORMAT,
            "version": SCHEMA_VERSION,
            "target": self.target,
            "class_labels": list(self.class_labels),
            "features": feats,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Schema":
        if d.get("version", SCHEMA_VERSION) != SCHEMA_VERSION:
            raise SchemaError(f"unsupported schema version {d.get('version')}")
        feats = []
        for fd in d["features"]:
            if fd["kind"] == "categorical":
                kind = Categorical(tuple(str(c) for c in fd["categories"]))
            elif fd["kind"] == "continuous":
                kind = Continuous(float(fd["min"]), float(fd["max"]))
            else:
                raise SchemaError(f"unknown feature kind {fd['kind']!r}")
            feats.append(Feature(fd["name"], kind))
        return cls(tuple(feats), d["target"], tuple(str(c) for c in d["class_labels"]))

    def save(self, path: PathLike) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path: PathLike) -> "Schema":
        return cls.from_dict(json.loads(Path(path).read_text()))


def _freeze(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Dataset:
    schema: Schema
    X: np.ndarray
    y: np.ndarray = field(repr=False)

    def __post_init__(self):
        X = np.array(self.X, dtype=float, ndmin=2)
        y = np.array(self.y, dtype=np.int64).reshape(-1)
        if len(self.X) == 0:
            X = np.empty((0, self.schema.m))
        if X.shape[1] != self.schema.m:
            raise SchemaError(f"X has {X.shape[1]} columns, schema has {self.schema.m}")
        if len(X) != len(y):
            raise SchemaError(f"{len(X)} instances but {len(y)} labels")
        if len(y) and (y.min() < 0 or y.max() >= self.schema.n_classes):
            raise SchemaError("label index out of range")
        object.__setattr__(self, "X", _freeze(X))
        object.__setattr__(self, "y", _freeze(y))

    def __len__(self) -> int:
        return len(self.y)

    def subset(self, indices) -> "Dataset":
        indices = np.asarray(indices, dtype=np.int64)
        return Dataset(self.schema, self.X[indices], self.y[indices])

    def raw(self) -> list[list]:
        return [self.schema.decode(x) for x in self.X]


# --- CSV ingestion ---------------------------------------------------------

def _read_csv(path: PathLike) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [[c.strip() for c in r] for r in csv.reader(fh, skipinitialspace=True) if r]
    if not rows:
        raise EmptyFile(f"{path}: no header row")
    return rows[0], rows[1:]


def load_csv(path: PathLike, schema: Schema) -> Dataset:
    """Load ``path`` according to ``schema``.

    Continuous values are normalised with the schema bounds (and clamped into
    [0, 1]); categorical values and the target are mapped to indices. Row
    order is preserved. Missing values are not imputed: an empty continuous
    cell raises UnparsableValue, an unlisted category raises UnknownCategory.
    Reported row numbers are 1-based data rows (the header is row 0).
    """
    header, rows = _read_csv(path)
    pos = {name: i for i, name in enumerate(header)}
    for name in schema.names + [schema.target]:
        if name not in pos:
            raise MissingColumn(name)
    cols = [pos[n] for n in schema.names]
    tcol = pos[schema.target]
    labels = {c: i for i, c in enumerate(schema.class_labels)}

    X = np.empty((len(rows), schema.m))
    y = np.empty(len(rows), dtype=np.int64)
    for r, row in enumerate(rows, start=1):
        if len(row) != len(header):
            raise UnparsableValue(r, "<row>", ",".join(row))
        for i, (c, f) in enumerate(zip(cols, schema.features)):
            cell = row[c]
            if isinstance(f.kind, Categorical):
                try:
                    X[r - 1, i] = f.kind.index(cell)
                except ValueError:
                    raise UnknownCategory(r, f.name, cell) from None
            else:
                try:
                    v = float(cell)
                except ValueError:
                    raise UnparsableValue(r, f.name, cell) from None
                if not math.isfinite(v):
                    raise UnparsableValue(r, f.name, cell)
                X[r - 1, i] = f.kind.normalize(v)
        try:
            y[r - 1] = labels[row[tcol]]
        except KeyError:
            raise UnknownCategory(r, schema.target, row[tcol]) from None
    return Dataset(schema, X, y)


def _as_float(s: str):
    try:
        v = float(s)
    except ValueError:
        return None
    return v if math.isfinite(v) else None


def infer_schema(path: PathLike, target: str, categorical_threshold: int = 2) -> Schema:
    """Derive a schema from the file contents.

    A column is categorical when any of its values is non-numeric or when it
    has at most ``categorical_threshold`` distinct values; otherwise it is
    continuous with the observed min/max. Category and class-label order is
    order of first appearance.
    """
    header, rows = _read_csv(path)
    if not rows:
        raise EmptyFile(f"{path}: header but no data rows")
    if target not in header:
        raise TargetNotFound(target)

    features = []
    for j, name in enumerate(header):
        if name == target:
            continue
        values = [row[j] for row in rows]
        distinct = list(dict.fromkeys(values))
        numeric = [_as_float(v) for v in distinct]
        if any(v is None for v in numeric) or len(distinct) <= categorical_threshold:
            features.append(Feature(name, Categorical(tuple(distinct))))
        else:
            features.append(Feature(name, Continuous(min(numeric), max(numeric))))
    labels = tuple(dict.fromkeys(row[header.index(target)] for row in rows))
    return Schema(tuple(features), target, labels)


def refit_bounds(train: Dataset, *others: Dataset) -> tuple[Dataset, ...]:
    """Re-derive continuous bounds from ``train`` alone and renormalise.

    Returns the renormalised ``train`` followed by each of ``others``; values of
    ``others`` outside the training range are clamped to [0, 1].
    """
    schema = train.schema
    feats = []
    for j, f in enumerate(schema.features):
        if isinstance(f.kind, Continuous) and len(train):
            raw = f.kind.min + train.X[:, j] * f.kind.span
            feats.append(Feature(f.name, Continuous(float(raw.min()), float(raw.max()))))
        else:
            feats.append(f)
    new = Schema(tuple(feats), schema.target, schema.class_labels)

    def renorm(ds: Dataset) -> Dataset:
        X = ds.X.copy()
        for j, (old, f) in enumerate(zip(schema.features, new.features)):
            if isinstance(f.kind, Continuous):
                raw = old.kind.min + X[:, j] * old.kind.span
                X[:, j] = (np.clip((raw - f.kind.min) / f.kind.span, 0.0, 1.0)
                           if f.kind.span > 0 else 0.0)
        return Dataset(new, X, ds.y)

    return (renorm(train),) + tuple(renorm(d) for d in others)


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def split(dataset: Dataset, test_fraction: float, seed: int,
          stratified: bool = True) -> tuple[Dataset, Dataset]:
    """Seeded train/test partition. Both parts keep the original row order."""
    if not 0.0 < test_fraction < 1.0:
        raise ValueError("test_fraction must lie in (0, 1)")
    n = len(dataset)
    if n == 0:
        raise ValueError("cannot split an empty dataset")
    rng = np.random.default_rng(seed)
    if stratified:
        test_idx = []
        counts = np.bincount(dataset.y, minlength=dataset.schema.n_classes)
        for c in np.flatnonzero(counts):
            if counts[c] < 2:
                raise ClassTooSmall(
                    f"class {dataset.schema.class_labels[c]!r} has {counts[c]} member(s)")
        for c in np.flatnonzero(counts):
            members = np.flatnonzero(dataset.y == c)
            k = _round_half_up(len(members) * test_fraction)
            test_idx.append(rng.permutation(members)[:k])
        test_idx = np.concatenate(test_idx)
    else:
        test_idx = rng.permutation(n)[:_round_half_up(n * test_fraction)]
    is_test = np.zeros(n, dtype=bool)
    is_test[test_idx] = True
    return dataset.subset(np.flatnonzero(~is_test)), dataset.subset(np.flatnonzero(is_test))


# --- distance --------------------------------------------------------------

def feature_differences(X: np.ndarray, q: np.ndarray, categorical: np.ndarray) -> np.ndarray:
    """Per-feature differences between each row of ``X`` and ``q``.

    |x_i - q_i| for continuous features, 0/1 overlap for categorical ones.
    """
    X = np.atleast_2d(X)
    diff = np.abs(X - q)
    diff[:, categorical] = (diff[:, categorical] != 0).astype(float)
    return diff


def distances(X: np.ndarray, q: np.ndarray, schema: Schema) -> np.ndarray:
    """Mixed Euclidean/overlap distance from ``q`` to every row of ``X``."""
    d = feature_differences(X, q, schema.categorical_mask)
    return np.sqrt(np.einsum("ij,ij->i", d, d))


def distance(a: np.ndarray, b: np.ndarray, schema: Schema) -> float:
    return float(distances(np.asarray(b, dtype=float)[None, :], np.asarray(a, dtype=float), schema)[0])


def concat(datasets: Iterable[Dataset]) -> Dataset:
    datasets = list(datasets)
    return Dataset(datasets[0].schema,
                   np.vstack([d.X for d in datasets]),
                   np.concatenate([d.y for d in datasets]))
