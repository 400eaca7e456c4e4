"""Shared independent oracles used across the test modules.

These deliberately re-derive results through the dumbest possible route
(scalar loops, exhaustive enumeration, pair counting) so they stay
independent of the library code they check.
"""

import math
from itertools import permutations

import numpy as np
import pytest


def bilinear_reference(src, target):
    """Scalar-loop bilinear resize with half-pixel centers and edge clamp."""
    src = np.asarray(src, dtype=np.float64)
    h, w = src.shape
    H, W = target
    out = np.zeros((H, W))
    for y in range(H):
        sy = min(max((y + 0.5) * h / H - 0.5, 0.0), h - 1.0)
        y0 = int(math.floor(sy))
        y1 = min(y0 + 1, h - 1)
        ty = sy - y0
        for x in range(W):
            sx = min(max((x + 0.5) * w / W - 0.5, 0.0), w - 1.0)
            x0 = int(math.floor(sx))
            x1 = min(x0 + 1, w - 1)
            tx = sx - x0
            top = src[y0, x0] * (1 - tx) + src[y0, x1] * tx
            bot = src[y1, x0] * (1 - tx) + src[y1, x1] * tx
            out[y, x] = top * (1 - ty) + bot * ty
    return out


def brute_force_assignment(cost):
    """Exhaustive minimum-cost injective assignment of min(n, m) pairs."""
    cost = np.asarray(cost, dtype=np.float64)
    n, m = cost.shape
    best_total = math.inf
    best = None
    if n <= m:
        for cols in permutations(range(m), n):
            total = sum(cost[i, c] for i, c in enumerate(cols))
            if total < best_total:
                best_total = total
                best = {i: c for i, c in enumerate(cols)}
    else:
        for rows in permutations(range(n), m):
            total = sum(cost[r, j] for j, r in enumerate(rows))
            if total < best_total:
                best_total = total
                best = {r: j for j, r in enumerate(rows)}
    return best_total, best


def adjusted_rand_index(a, b):
    """Pair-counting ARI, straight from the contingency table."""
    a = np.asarray(a).ravel()
    b = np.asarray(b).ravel()
    assert a.size == b.size and a.size > 0
    _, ai = np.unique(a, return_inverse=True)
    _, bi = np.unique(b, return_inverse=True)
    table = np.zeros((ai.max() + 1, bi.max() + 1), dtype=np.int64)
    np.add.at(table, (ai, bi), 1)

    def comb2(x):
        return x * (x - 1) / 2.0

    sum_cells = comb2(table.astype(np.float64)).sum()
    sum_rows = comb2(table.sum(axis=1).astype(np.float64)).sum()
    sum_cols = comb2(table.sum(axis=0).astype(np.float64)).sum()
    total = comb2(float(a.size))
    expected = sum_rows * sum_cols / total
    max_index = (sum_rows + sum_cols) / 2.0
    if max_index == expected:
        return 1.0
    return (sum_cells - expected) / (max_index - expected)


@pytest.fixture
def rng():
    return np.random.default_rng(20240901)
