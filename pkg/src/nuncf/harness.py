"""Experiment runner: data -> model -> method matrix over a query set -> reports.

Output directory layout written by :func:`write_report`:

``report.json``
    accuracy, config echo, engine version and one entry per (method, mode)
    cell with #F, $F, query count and failure count. Deterministic.
``report.txt``
    the same as an aligned text table.
``records.jsonl``
    one record per query per cell: query and counterfactual (normalised),
    ordered substitution trace, NUN case index, classes.
``explanations/<METHOD>-<mode>.txt``
    rendered text explanation for every query of a cell.
``schema.json``
    the training-fitted schema the normalised values refer to.
``timings.json``
    wall-clock seconds per cell (the only non-deterministic file).

With ``repeats > 1`` each run goes to ``repeat-<r>/`` (seed ``seed + r``) and
``summary.json`` / ``summary.txt`` hold the per-cell means over the runs.
"""
from __future__ import annotations

import json
import logging
import time
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from . import __version__
from .counterfactual import CounterfactualEngine, CounterfactualResult, OrderingMode, normalize_cell
from .dataset import Dataset, Schema, concat, infer_schema, load_csv, refit_bounds, split
from .errors import NuncfError, NoUnlikeNeighbour
from .external import external_model_adapter
from .metrics import MetricsReport, compute_metrics, dumps_record, format_table, metrics_from_pairs
from .model import Classifier, RandomForest, evaluate_accuracy, train_random_forest
from .relevance import ExplainerConfig, Method
from .seeding import derive_seed
from .textgen import render

log = logging.getLogger(__name__)


@dataclass
class ModelConfig:
    n_trees: int = 100
    max_depth: int | None = None
    min_samples_leaf: int = 1
    n_jobs: int = 1


@dataclass
class ExperimentConfig:
    data: str
    target: str | None = None
    schema: str | None = None
    categorical_threshold: int = 2
    test_fraction: float = 0.3
    stratified: bool = True
    seed: int = 0
    model: ModelConfig = field(default_factory=ModelConfig)
    model_file: str | None = None
    prediction_table: str | None = None
    methods: list = field(default_factory=lambda: [["RND", "null"], ["LIME", "qrel"], ["SHAP", "qrel"]])
    explainer: ExplainerConfig = field(default_factory=ExplainerConfig)
    desired_class: str | None = None
    case_base: str = "train"          # "train" or "all"
    max_queries: int | None = None
    repeats: int = 1                  # runs with seeds seed, seed+1, ...; bench averages them
    out: str = "out"

    def __post_init__(self):
        if isinstance(self.model, dict):
            self.model = ModelConfig(**self.model)
        if isinstance(self.explainer, dict):
            self.explainer = ExplainerConfig(**self.explainer)
        if not self.methods:
            raise ValueError("config needs at least one (method, mode) cell")
        if self.schema is None and self.target is None:
            raise ValueError("config needs either 'schema' or 'target'")
        if self.case_base not in ("train", "all"):
            raise ValueError("case_base must be 'train' or 'all'")
        if self.repeats < 1:
            raise ValueError("repeats must be >= 1")

    @property
    def cells(self) -> list[tuple[Method, OrderingMode]]:
        out = []
        for method, mode in self.methods:
            cell = normalize_cell(Method.parse(method), OrderingMode.parse(mode))
            if cell not in out:
                out.append(cell)
        return out

    @classmethod
    def from_dict(cls, d: dict, base_dir: Path | None = None) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        d = dict(d)
        if base_dir is not None:
            for key in ("data", "schema", "model_file", "prediction_table"):
                if d.get(key) is not None and not Path(d[key]).is_absolute():
                    d[key] = str(base_dir / d[key])
        return cls(**d)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        path = Path(path)
        return cls.from_dict(json.loads(path.read_text()), base_dir=path.parent)

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("out")
        d["methods"] = [[m.value, md.value] for m, md in self.cells]
        for key in ("data", "schema", "model_file", "prediction_table"):
            if d[key] is not None:
                d[key] = Path(d[key]).name     # echo names, not machine paths
        return d


@dataclass
class Prepared:
    schema: Schema
    train: Dataset
    test: Dataset
    model: Classifier
    accuracy: float


@dataclass
class ExperimentReport:
    config: ExperimentConfig
    schema: Schema
    accuracy: float
    query_rows: list[int]
    cells: dict            # (method, mode) -> MetricsReport | None
    results: dict          # (method, mode) -> list[CounterfactualResult | str]
    queries: np.ndarray
    timings: dict
    version: str = __version__

    def summary(self) -> dict:
        cells = []
        for (method, mode), rep in self.cells.items():
            failures = sum(isinstance(r, str) for r in self.results[(method, mode)])
            cells.append({
                "method": method.value, "mode": mode.value,
                "n_queries": rep.n_queries if rep else 0,
                "mean_changes": rep.mean_changes if rep else None,
                "mean_amount": rep.mean_amount if rep else None,
                "failures": failures,
            })
        return {"engine_version": self.version, "config": self.config.to_dict(),
                "accuracy": self.accuracy, "n_queries": len(self.query_rows), "cells": cells}

    def table(self) -> str:
        cells = {(m.value, md.value): rep for (m, md), rep in self.cells.items() if rep}
        head = (f"accuracy {self.accuracy:.4f}  queries {len(self.query_rows)}  "
                f"engine {self.version}")
        return format_table(cells, title=head) if cells else head + "\n"


def prepare(config: ExperimentConfig) -> Prepared:
    """Load and split the data, then train or attach the model."""
    schema = (Schema.load(config.schema) if config.schema
              else infer_schema(config.data, config.target, config.categorical_threshold))
    full = load_csv(config.data, schema)
    train, test = split(full, config.test_fraction, derive_seed(config.seed, "split"),
                        stratified=config.stratified)
    train, test = refit_bounds(train, test)
    if config.prediction_table:
        model = external_model_adapter(config.prediction_table)
    elif config.model_file:
        model = RandomForest.load(config.model_file)
    else:
        mc = config.model
        model = train_random_forest(train, mc.n_trees, mc.max_depth, mc.min_samples_leaf,
                                    seed=derive_seed(config.seed, "model"), n_jobs=mc.n_jobs)
    accuracy = evaluate_accuracy(model, test)
    return Prepared(train.schema, train, test, model, accuracy)


def select_queries(prepared: Prepared, desired: int | None, max_queries: int | None,
                   seed: int) -> list[int]:
    """Test rows the model does not already place in the desired class."""
    pred = np.asarray(prepared.model.predict(prepared.test.X))
    rows = np.arange(len(pred)) if desired is None else np.flatnonzero(pred != desired)
    if max_queries is not None and len(rows) > max_queries:
        rng = np.random.default_rng(derive_seed(seed, "queries"))
        rows = np.sort(rng.choice(rows, size=max_queries, replace=False))
    return [int(r) for r in rows]


def run_experiment(config: ExperimentConfig, prepared: Prepared | None = None) -> ExperimentReport:
    """Run every configured cell over one shared query set and NUN list.

    A query that fails in a cell is recorded as an error string and skipped.
    """
    prepared = prepare(config) if prepared is None else prepared
    schema = prepared.schema
    desired = None if config.desired_class is None else schema.class_index(config.desired_class)
    case_base = prepared.train if config.case_base == "train" else concat([prepared.train, prepared.test])
    engine = CounterfactualEngine(case_base, prepared.model, config.explainer, train=prepared.train)

    rows = select_queries(prepared, desired, config.max_queries, config.seed)
    queries = prepared.test.X[rows] if rows else np.empty((0, schema.m))

    # one NUN per query, shared by all cells
    nuns = []
    for q in queries:
        try:
            nuns.append(engine.nun(q, int(prepared.model.predict(q)), desired))
        except NoUnlikeNeighbour as exc:
            nuns.append(f"NoUnlikeNeighbour: {exc}")

    cells, results, timings = {}, {}, {}
    for method, mode in config.cells:
        start = time.perf_counter()
        out = []
        for j, (q, nun) in enumerate(zip(queries, nuns)):
            if isinstance(nun, str):
                out.append(nun)
                continue
            try:
                out.append(engine.explain(q, method, mode, desired_class=desired,
                                          seed=derive_seed(config.seed, method.value, j), nun=nun))
            except NuncfError as exc:
                log.warning("cell %s/%s query %d: %s", method.value, mode.value, j, exc)
                out.append(f"{type(exc).__name__}: {exc}")
        ok = [(r, q) for r, q in zip(out, queries) if not isinstance(r, str)]
        cells[(method, mode)] = (compute_metrics([r for r, _ in ok], [q for _, q in ok], schema)
                                 if ok else None)
        results[(method, mode)] = out
        timings[f"{method.value}-{mode.value}"] = time.perf_counter() - start
        log.info("cell %s/%s done in %.1fs", method.value, mode.value,
                 timings[f"{method.value}-{mode.value}"])
    return ExperimentReport(config, schema, prepared.accuracy, rows, cells, results,
                            queries, timings)


def run_repeats(config: ExperimentConfig) -> list[ExperimentReport]:
    """One experiment per seed ``seed, seed + 1, ..., seed + repeats - 1``."""
    return [run_experiment(replace(config, seed=config.seed + r, repeats=1))
            for r in range(config.repeats)]


def average_reports(reports: list[ExperimentReport]) -> dict:
    """Per-cell mean #F and $F over repeated runs (cells that produced metrics)."""
    cells = []
    for cell in reports[0].cells:
        reps = [r.cells[cell] for r in reports if r.cells.get(cell) is not None]
        cells.append({
            "method": cell[0].value, "mode": cell[1].value, "runs": len(reps),
            "mean_changes": float(np.mean([m.mean_changes for m in reps])) if reps else None,
            "mean_amount": float(np.mean([m.mean_amount for m in reps])) if reps else None,
        })
    return {"engine_version": reports[0].version,
            "seeds": [r.config.seed for r in reports],
            "accuracy": float(np.mean([r.accuracy for r in reports])),
            "cells": cells}


def write_summary(summary: dict, out_dir) -> str:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    cells = {(c["method"], c["mode"]): MetricsReport(c["runs"], c["mean_changes"],
                                                     c["mean_amount"], ())
             for c in summary["cells"] if c["runs"]}
    title = f"mean of {len(summary['seeds'])} runs  accuracy {summary['accuracy']:.4f}"
    text = format_table(cells, title=title) if cells else title + "\n"
    (out / "summary.txt").write_text(text)
    return text


def result_record(cell: tuple[Method, OrderingMode], position: int, test_row: int,
                  query: np.ndarray, result) -> dict:
    rec = {"method": cell[0].value, "mode": cell[1].value, "query_index": position,
           "test_row": test_row, "query": [float(v) for v in query]}
    if isinstance(result, str):
        rec["error"] = result
        return rec
    rec.update({
        "counterfactual": [float(v) for v in result.counterfactual],
        "query_class": result.query_class, "new_class": result.new_class,
        "nun_case_index": result.nun_used.case_index,
        "nun_distance": result.nun_used.distance,
        "changes": [[c.feature, c.old, c.new] for c in result.changed_features],
        "n_changes": result.n_changes, "amount": result.amount,
    })
    return rec


def write_report(report: ExperimentReport, out_dir) -> Path:
    out = Path(out_dir)
    (out / "explanations").mkdir(parents=True, exist_ok=True)
    report.schema.save(out / "schema.json")
    (out / "report.json").write_text(json.dumps(report.summary(), indent=2, sort_keys=True) + "\n")
    (out / "report.txt").write_text(report.table())
    with open(out / "records.jsonl", "w", encoding="utf-8") as fh:
        for cell, res in report.results.items():
            for j, (row, q, r) in enumerate(zip(report.query_rows, report.queries, res)):
                fh.write(dumps_record(result_record(cell, j, row, q, r)) + "\n")
    for (method, mode), res in report.results.items():
        blocks = []
        for j, (q, r) in enumerate(zip(report.queries, res)):
            body = r if isinstance(r, str) else str(render(r, q, report.schema))
            blocks.append(f"# query {j} (test row {report.query_rows[j]})\n{body}\n")
        (out / "explanations" / f"{method.value}-{mode.value}.txt").write_text("\n".join(blocks))
    (out / "timings.json").write_text(json.dumps(report.timings, indent=2, sort_keys=True) + "\n")
    return out


def metrics_from_records(path, schema: Schema) -> dict:
    """Recompute per-cell metrics from a ``records.jsonl`` dump."""
    by_cell: dict = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            rec = json.loads(line)
            if "error" in rec:
                continue
            by_cell.setdefault((rec["method"], rec["mode"]), []).append(rec)
    return {cell: metrics_from_pairs(np.array([r["counterfactual"] for r in recs]),
                                     np.array([r["query"] for r in recs]), schema)
            for cell, recs in by_cell.items()}


def explain_one(config: ExperimentConfig, prepared: Prepared, test_row: int,
                method, mode) -> tuple[CounterfactualResult, str]:
    """Explain a single test row; returns the result and its rendered text."""
    schema = prepared.schema
    desired = None if config.desired_class is None else schema.class_index(config.desired_class)
    case_base = prepared.train if config.case_base == "train" else concat([prepared.train, prepared.test])
    engine = CounterfactualEngine(case_base, prepared.model, config.explainer, train=prepared.train)
    method, mode = normalize_cell(method, mode)
    q = prepared.test.X[test_row]
    res = engine.explain(q, method, mode, desired_class=desired,
                         seed=derive_seed(config.seed, method.value, test_row))
    return res, str(render(res, q, schema))
