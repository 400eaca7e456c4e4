"""Prompt-free segmentation from pixel feature affinities.

Pipeline: fused features are resized to a small working grid (100x100 by
default, never upsampled past the input), pairwise cosine similarities
between pixel vectors form an affinity graph, a graph Laplacian's smallest
eigenvectors embed the pixels, and seeded k-means on the embedding rows
yields clusters. The 0/1 cluster indicator maps then stand in for
attention maps in the prototype-averaging step, and every full-resolution
pixel is assigned to the most cosine-similar cluster prototype.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .assign import NORM_EPSILON, assign_labels, representatives_from_attention
from .eigen import DENSE_LIMIT, smallest_eigpairs
from .fusion import FusedFeatureMap, resize_bilinear, resize_nearest
from .kmeans import kmeans_cluster

WORKING_RESOLUTION = (100, 100)
DEGREE_EPSILON = 1e-12
SYMMETRY_TOL = 1e-8

LAPLACIAN_KINDS = ("sym", "unnormalized")


@dataclass
class SimilarityGraph:
    """Symmetric pixel-affinity matrix over a working grid."""

    weights: np.ndarray  # (n, n), entries in [0, 1]
    grid: tuple[int, int]  # (H, W) with H*W == n

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        n = self.weights.shape[0]
        if self.weights.shape != (n, n):
            raise ValueError(f"weights must be square, got {self.weights.shape}")
        if self.grid[0] * self.grid[1] != n:
            raise ValueError(f"grid {self.grid} does not cover {n} nodes")

    @property
    def n(self) -> int:
        return self.weights.shape[0]


@dataclass
class ClusterMap:
    """Per-pixel anonymous cluster ids, image-local."""

    labels: np.ndarray  # (H, W) int32
    k: int

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.int32)
        if self.labels.ndim != 2:
            raise ValueError(f"labels must be 2-D, got shape {self.labels.shape}")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.k):
            raise ValueError(f"cluster ids must lie in [0, {self.k})")

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    @property
    def width(self) -> int:
        return self.labels.shape[1]


def resize_features(f: FusedFeatureMap, target: tuple[int, int]) -> FusedFeatureMap:
    """Bilinear resize of a fused feature map, channelwise."""
    chw = np.moveaxis(f.data, -1, 0)
    resized = resize_bilinear(chw, target)
    return FusedFeatureMap(np.ascontiguousarray(np.moveaxis(resized, 0, -1)))


def similarity_graph(
    f: FusedFeatureMap, working_resolution: tuple[int, int] = WORKING_RESOLUTION
) -> SimilarityGraph:
    """Pairwise cosine similarity between working-grid pixel features.

    Negative cosines are clamped to 0 and the diagonal is forced to 1, so
    entries form a valid affinity in [0, 1].
    """
    fw = resize_features(f, working_resolution)
    flat = fw.pixel_matrix()
    norms = np.linalg.norm(flat, axis=1)
    safe = np.where(norms > NORM_EPSILON, norms, 1.0)
    unit = flat / safe[:, None]
    unit[norms <= NORM_EPSILON] = 0.0
    weights = unit @ unit.T
    weights = (weights + weights.T) / 2.0
    np.clip(weights, 0.0, 1.0, out=weights)
    np.fill_diagonal(weights, 1.0)
    return SimilarityGraph(weights, (fw.height, fw.width))


def laplacian_matrix(weights: np.ndarray, kind: str = "sym") -> np.ndarray:
    """Graph Laplacian of a symmetric affinity matrix.

    `sym` is the symmetric normalized form I - D^{-1/2} W D^{-1/2} with
    isolated-node degrees floored at 1e-12; `unnormalized` is D - W.
    """
    if kind not in LAPLACIAN_KINDS:
        raise ValueError(f"unknown laplacian kind {kind!r}")
    weights = np.asarray(weights, dtype=np.float64)
    degrees = weights.sum(axis=1)
    if kind == "unnormalized":
        return np.diag(degrees) - weights
    inv_sqrt = 1.0 / np.sqrt(np.maximum(degrees, DEGREE_EPSILON))
    lap = -(inv_sqrt[:, None] * weights) * inv_sqrt[None, :]
    lap = (lap + lap.T) / 2.0
    lap[np.diag_indices_from(lap)] += 1.0
    return lap


def spectral_cluster(
    graph: SimilarityGraph | np.ndarray,
    k: int,
    seed: int,
    laplacian: str = "sym",
    method: str = "auto",
) -> np.ndarray:
    """Cluster graph nodes via the Laplacian's smallest eigenvectors.

    Embedding rows are L2-normalized (zero rows left alone) before seeded
    k-means. The dense eigensolver serves n <= 1024; larger graphs use the
    restarted Lanczos route. Returns one cluster id per node.
    """
    weights = graph.weights if isinstance(graph, SimilarityGraph) else np.asarray(graph)
    weights = weights.astype(np.float64, copy=False)
    n = weights.shape[0]
    if weights.shape != (n, n) or not np.allclose(weights, weights.T, atol=SYMMETRY_TOL):
        raise ValueError("affinity matrix must be symmetric")
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= {n}, got k={k}")
    lap = laplacian_matrix(weights, laplacian)
    _, vecs = smallest_eigpairs(lap, k, seed, method=method)
    norms = np.linalg.norm(vecs, axis=1)
    safe = np.where(norms > NORM_EPSILON, norms, 1.0)
    embedding = vecs / safe[:, None]
    labels, _ = kmeans_cluster(embedding, k, seed)
    return labels.astype(np.int32)


def unsup_segment(
    f: FusedFeatureMap,
    k: int,
    seed: int,
    output_resolution: tuple[int, int] | None = None,
    working_resolution: tuple[int, int] | None = None,
    laplacian: str = "sym",
    method: str = "auto",
) -> ClusterMap:
    """Cluster working-grid pixels, then refine to full resolution.

    The spectral cluster indicators (0/1 maps) replace attention in the
    prototype-averaging step; assignment runs on the full-resolution fused
    features, and the label map is finally nearest-resized to
    `output_resolution` (labels are categorical, so no interpolation).
    """
    if working_resolution is None:
        working_resolution = (min(WORKING_RESOLUTION[0], f.height),
                              min(WORKING_RESOLUTION[1], f.width))
    fw = resize_features(f, working_resolution)
    graph = similarity_graph(fw, working_resolution)
    node_ids = spectral_cluster(graph, k, seed, laplacian=laplacian, method=method)
    grid_ids = node_ids.reshape(graph.grid)
    indicators = np.zeros((k, *graph.grid), dtype=np.float64)
    for j in range(k):
        indicators[j] = grid_ids == j
    reps = representatives_from_attention(fw, indicators)
    seg = assign_labels(f, reps)
    out = seg.labels
    if output_resolution is not None and tuple(output_resolution) != out.shape:
        out = resize_nearest(out, output_resolution)
    return ClusterMap(out, k)
