"""Adapters that expose externally computed predictions as a Classifier.

Adapter file (JSON), one of two shapes::

    {"n_classes": 2, "decimals": 9,
     "rows": [{"x": [0.5, 1.0], "proba": [0.2, 0.8]}, ...]}

    {"n_classes": 2, "command": ["python3", "my_model.py"]}

In table mode instances are matched on their normalised values rounded to
``decimals`` places. In command mode the subprocess speaks a line protocol:
nuncf writes one JSON array of feature values per line to its stdin and
reads back one JSON array of ``n_classes`` probabilities per line.
"""
from __future__ import annotations

import json
import subprocess
import threading
from pathlib import Path

import numpy as np

from .errors import LookupMiss, ProtocolViolation
from .model import Classifier


class TableClassifier(Classifier):
    def __init__(self, rows, n_classes: int, decimals: int = 9):
        self.n_classes = n_classes
        self.decimals = decimals
        self._table = {}
        for x, p in rows:
            p = np.asarray(p, dtype=float)
            if p.shape != (n_classes,):
                raise ValueError(f"probability row {p.tolist()} does not have {n_classes} entries")
            self._table[self._key(x)] = p

    def _key(self, x) -> tuple:
        return tuple(np.round(np.asarray(x, dtype=float), self.decimals).tolist())

    def predict_proba(self, X):
        X = np.asarray(X, dtype=float)
        single = X.ndim == 1
        out = []
        for x in np.atleast_2d(X):
            try:
                out.append(self._table[self._key(x)])
            except KeyError:
                raise LookupMiss(f"no prediction for instance {x.tolist()}") from None
        P = np.array(out).reshape(-1, self.n_classes)
        return P[0] if single else P


class SubprocessClassifier(Classifier):
    """Query a long-running child process, one instance per line.

    Calls are serialised with a lock; the child is started lazily.
    """

    def __init__(self, command, n_classes: int, cwd=None):
        self.command = list(command)
        self.n_classes = n_classes
        self.cwd = cwd
        self._proc = None
        self._lock = threading.Lock()

    def _ensure(self):
        if self._proc is None or self._proc.poll() is not None:
            self._proc = subprocess.Popen(self.command, stdin=subprocess.PIPE,
                                          stdout=subprocess.PIPE, text=True, bufsize=1,
                                          cwd=self.cwd)
        return self._proc

    def _ask(self, x) -> np.ndarray:
        proc = self._ensure()
        try:
            proc.stdin.write(json.dumps([float(v) for v in x]) + "\n")
            proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            raise ProtocolViolation(f"model process closed its input: {exc}") from None
        line = proc.stdout.readline()
        if not line:
            raise ProtocolViolation("model process ended without answering")
        try:
            p = np.asarray(json.loads(line), dtype=float)
        except (ValueError, TypeError):
            raise ProtocolViolation(f"unparsable reply {line.strip()!r}") from None
        if p.shape != (self.n_classes,) or np.any(p < 0) or np.any(p > 1) \
                or abs(p.sum() - 1.0) > 1e-6:
            raise ProtocolViolation(f"reply {line.strip()!r} is not a distribution "
                                    f"over {self.n_classes} classes")
        return p

    def predict_proba(self, X):
        X = np.asarray(X, dtype=float)
        single = X.ndim == 1
        with self._lock:
            P = np.array([self._ask(x) for x in np.atleast_2d(X)]).reshape(-1, self.n_classes)
        return P[0] if single else P

    def close(self):
        if self._proc is not None:
            self._proc.stdin.close()
            self._proc.wait(timeout=10)
            self._proc = None

    def __del__(self):
        try:
            if self._proc is not None:
                self._proc.kill()
        except Exception:
            pass


def external_model_adapter(path) -> Classifier:
    path = Path(path)
    desc = json.loads(path.read_text())
    n_classes = int(desc["n_classes"])
    if "command" in desc:
        return SubprocessClassifier(desc["command"], n_classes, cwd=path.parent)
    rows = [(r["x"], r["proba"]) for r in desc["rows"]]
    return TableClassifier(rows, n_classes, int(desc.get("decimals", 9)))


def write_prediction_table(path, model: Classifier, X: np.ndarray, decimals: int = 9) -> None:
    """Dump ``model``'s probabilities for ``X`` in the table format above."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    P = model.predict_proba(X)
    rows = [{"x": x.tolist(), "proba": p.tolist()} for x, p in zip(X, P)]
    Path(path).write_text(json.dumps({"n_classes": int(model.n_classes), "decimals": decimals,
                                      "rows": rows}) + "\n")
