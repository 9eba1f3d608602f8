"""Batch evaluation of counterfactuals: mean number of changed features (#F)
and mean amount of change per changed feature ($F).
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .counterfactual import CounterfactualResult
from .dataset import Schema, feature_differences
from .errors import LengthMismatch


@dataclass(frozen=True)
class MetricsReport:
    n_queries: int
    mean_changes: float
    mean_amount: float
    per_query: tuple[tuple[int, float], ...]

    def to_dict(self) -> dict:
        return {"n_queries": self.n_queries, "mean_changes": self.mean_changes,
                "mean_amount": self.mean_amount,
                "per_query": [list(p) for p in self.per_query]}


def metrics_from_pairs(counterfactuals: np.ndarray, queries: np.ndarray,
                       schema: Schema) -> MetricsReport:
    """#F and $F from final counterfactuals against their queries.

    #F counts differing features per query, averaged over queries. $F is the
    total per-feature difference (|Δ| continuous, 0/1 categorical) divided by
    the total number of changed features across the batch.
    """
    cf = np.atleast_2d(np.asarray(counterfactuals, dtype=float))
    q = np.atleast_2d(np.asarray(queries, dtype=float))
    if cf.shape != q.shape or len(q) == 0:
        raise LengthMismatch(f"{cf.shape} counterfactuals vs {q.shape} queries")
    diff = feature_differences(cf, q, schema.categorical_mask)
    counts = (cf != q).sum(axis=1)
    if np.any(counts == 0):
        raise ValueError("a counterfactual identical to its query is not a valid result")
    amounts = diff.sum(axis=1)
    n = len(q)
    mean_changes = float(counts.sum() / n)
    mean_amount = float(amounts.sum() / counts.sum())
    return MetricsReport(n, mean_changes, mean_amount,
                         tuple((int(c), float(a)) for c, a in zip(counts, amounts)))


def compute_metrics(results: Sequence[CounterfactualResult], queries: Sequence[np.ndarray],
                    schema: Schema) -> MetricsReport:
    if len(results) != len(queries) or len(results) == 0:
        raise LengthMismatch(f"{len(results)} results for {len(queries)} queries")
    return metrics_from_pairs(np.array([r.counterfactual for r in results]),
                              np.array(queries, dtype=float), schema)


def format_table(cells: dict, title: str = "") -> str:
    """Aligned text table: one row per relevance method, #F and $F per mode.

    ``cells`` maps ``(method_name, mode_name)`` to a MetricsReport.
    """
    modes = sorted({mode for _, mode in cells}, key=["qrel", "nrel", "null"].index)
    methods = list(dict.fromkeys(method for method, _ in cells))
    head = ["method"] + [f"#F {md}" for md in modes] + [f"$F {md}" for md in modes]
    rows = []
    for meth in methods:
        row = [meth]
        for fmt, attr in (("{:.2f}", "mean_changes"), ("{:.4f}", "mean_amount")):
            for md in modes:
                rep = cells.get((meth, md))
                row.append(fmt.format(getattr(rep, attr)) if rep else "-")
        rows.append(row)
    widths = [max(len(r[i]) for r in [head] + rows) for i in range(len(head))]
    line = lambda r: "  ".join(c.ljust(w) if i == 0 else c.rjust(w)
                               for i, (c, w) in enumerate(zip(r, widths)))
    out = ([title] if title else []) + [line(head), "  ".join("-" * w for w in widths)]
    return "\n".join(out + [line(r) for r in rows]) + "\n"


def dumps_record(record: dict) -> str:
    return json.dumps(record, sort_keys=True, separators=(",", ":"))
