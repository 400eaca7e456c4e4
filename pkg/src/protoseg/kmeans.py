"""Seeded k-means with k-means++ initialization and Lloyd iterations.

Used both as the clustering step on spectral embeddings and as the
pixel-wise clustering baseline on fused features. Runs are deterministic
for a fixed (points, k, seed). Lloyd stops when the relative inertia
change drops below 1e-4 or after 300 iterations; an empty cluster is
reseeded to the point currently farthest from its assigned centroid.
Within-run inertia must never increase; a violation raises, since it can
only come from an implementation bug.
"""

from __future__ import annotations

import numpy as np

MAX_ITER = 300
REL_TOL = 1e-4


def _squared_distances(points: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    d2 = (
        (points * points).sum(axis=1)[:, None]
        + (centroids * centroids).sum(axis=1)[None, :]
        - 2.0 * points @ centroids.T
    )
    return np.maximum(d2, 0.0)


def _plusplus_init(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = points.shape[0]
    centroids = np.empty((k, points.shape[1]), dtype=np.float64)
    centroids[0] = points[rng.integers(n)]
    d2 = _squared_distances(points, centroids[:1]).ravel()
    for j in range(1, k):
        total = d2.sum()
        if total <= 0.0:  # all remaining points coincide with a centroid
            idx = int(rng.integers(n))
        else:
            idx = int(rng.choice(n, p=d2 / total))
        centroids[j] = points[idx]
        d2 = np.minimum(d2, _squared_distances(points, centroids[j : j + 1]).ravel())
    return centroids


def kmeans_cluster(
    points: np.ndarray, k: int, seed: int
) -> tuple[np.ndarray, np.ndarray]:
    """Cluster row vectors into k groups; returns (labels, centroids)."""
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2:
        raise ValueError(f"points must be (n, D), got shape {points.shape}")
    n = points.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= {n} points, got k={k}")
    rng = np.random.default_rng(seed)
    centroids = _plusplus_init(points, k, rng)

    prev_inertia = np.inf
    labels = np.zeros(n, dtype=np.int32)
    for _ in range(MAX_ITER):
        d2 = _squared_distances(points, centroids)
        labels = np.argmin(d2, axis=1).astype(np.int32)
        assigned = d2[np.arange(n), labels]
        inertia = float(assigned.sum())
        if inertia > prev_inertia * (1.0 + 1e-12) + 1e-12:
            raise RuntimeError(
                f"inertia increased: {prev_inertia} -> {inertia}"
            )
        if np.isfinite(prev_inertia) and prev_inertia - inertia <= REL_TOL * prev_inertia:
            break
        prev_inertia = inertia

        counts = np.bincount(labels, minlength=k)
        sums = np.zeros_like(centroids)
        np.add.at(sums, labels, points)
        nonempty = counts > 0
        centroids[nonempty] = sums[nonempty] / counts[nonempty, None]
        if not nonempty.all():
            # hand each empty cluster the point farthest from its centroid
            candidates = assigned.copy()
            for j in np.flatnonzero(~nonempty):
                idx = int(np.argmax(candidates))
                centroids[j] = points[idx]
                candidates[idx] = -1.0
    return labels, centroids
