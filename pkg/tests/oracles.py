"""Reference implementations written independently of the package code paths.

Plain Python loops on purpose; used to freeze or cross-check expected values.
"""
import itertools
import math

import numpy as np


def exact_shapley(f, x, background):
    """Shapley values of v(S) = mean_b f(x_S, b_rest) by enumerating coalitions."""
    x = list(map(float, x))
    m = len(x)

    def value(S):
        total = 0.0
        for b in background:
            z = [x[i] if i in S else float(b[i]) for i in range(m)]
            total += f(z)
        return total / len(background)

    cache = {}
    for r in range(m + 1):
        for S in itertools.combinations(range(m), r):
            cache[frozenset(S)] = value(set(S))
    phi = []
    for i in range(m):
        acc = 0.0
        others = [j for j in range(m) if j != i]
        for r in range(m):
            weight = math.factorial(r) * math.factorial(m - r - 1) / math.factorial(m)
            for S in itertools.combinations(others, r):
                S = frozenset(S)
                acc += weight * (cache[S | {i}] - cache[S])
        phi.append(acc)
    return phi


def scan_nun(X, predicted, query, query_class, categorical, desired=None):
    """Exhaustive scan; ties resolved by the lowest row index. Returns (index, distance)."""
    best, best_d = None, None
    for idx in range(len(X)):
        c = predicted[idx]
        if c == query_class or (desired is not None and c != desired):
            continue
        s = 0.0
        for j in range(len(query)):
            if categorical[j]:
                d = 0.0 if X[idx][j] == query[j] else 1.0
            else:
                d = abs(X[idx][j] - query[j])
            s += d * d
        dist = math.sqrt(s)
        if best is None or dist < best_d:
            best, best_d = idx, dist
    return best, best_d


def reference_metrics(counterfactuals, queries, categorical):
    """#F and $F by double loop over queries and features."""
    n = len(queries)
    changes = 0
    amount = 0.0
    for cf, q in zip(counterfactuals, queries):
        for i in range(len(q)):
            if cf[i] != q[i]:
                changes += 1
                amount += 1.0 if categorical[i] else abs(cf[i] - q[i])
    mean_changes = changes / n
    return mean_changes, amount / (n * mean_changes)


def chi2_statistic(codes, labels):
    """Pearson chi-squared of a contingency table built with dictionaries."""
    table = {}
    for c, y in zip(codes, labels):
        table[(c, y)] = table.get((c, y), 0) + 1
    rows = sorted({c for c, _ in table})
    cols = sorted({y for _, y in table})
    n = len(codes)
    rsum = {r: sum(table.get((r, c), 0) for c in cols) for r in rows}
    csum = {c: sum(table.get((r, c), 0) for r in rows) for c in cols}
    stat = 0.0
    for r in rows:
        for c in cols:
            e = rsum[r] * csum[c] / n
            stat += (table.get((r, c), 0) - e) ** 2 / e
    return stat


def prefix_flip_counts(query, nun, order, predict, query_class):
    """Number of substitutions needed when copying ``nun`` into ``query`` in ``order``."""
    x = list(query)
    n = 0
    for i in order:
        if x[i] == nun[i]:
            continue
        x[i] = nun[i]
        n += 1
        if predict(np.array(x)) != query_class:
            return n
    return None
