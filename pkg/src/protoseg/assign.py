"""Class prototypes from attention-weighted feature averages, and
per-pixel labeling by maximum cosine similarity to those prototypes.

The prototype for class c is the weighted mean of the fused per-pixel
features, weighted by that class's fused attention map. Attention logits
are raw (no softmax), so they may be negative; the default policy clamps
negatives to zero before averaging, keeping every prototype a convex
combination of observed features. `shift` (subtract the per-class minimum
when negative) and `raw` are available for investigation.

A class whose total weight falls below 1e-8 is marked inactive and never
assigned. Cosine against a zero vector is defined as 0 (norm guard 1e-12);
argmax ties break to the lowest class id.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fusion import FusedFeatureMap
from .tensor_store import ClassVocabulary

WEIGHT_EPSILON = 1e-8
NORM_EPSILON = 1e-12

NEGATIVE_POLICIES = ("clamp", "shift", "raw")

# assign_labels processes pixels in bounded slabs to keep peak memory flat
_CHUNK = 65536


class NoActiveClassError(ValueError):
    """Raised when every class ends up inactive (or none was supplied)."""


@dataclass
class RepresentativeSet:
    """Per-class prototype vectors plus their accumulated weight mass."""

    vectors: np.ndarray  # (K, D); rows of inactive classes are zero
    weights_total: np.ndarray  # (K,)
    active: np.ndarray  # (K,) bool

    def __post_init__(self):
        self.vectors = np.asarray(self.vectors, dtype=np.float64)
        self.weights_total = np.asarray(self.weights_total, dtype=np.float64)
        self.active = np.asarray(self.active, dtype=bool)
        if not self.active.any():
            raise NoActiveClassError("no class has usable weight mass")
        if not np.isfinite(self.vectors[self.active]).all():
            raise ValueError("active prototype vectors must be finite")

    @property
    def num_classes(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def active_ids(self) -> np.ndarray:
        return np.flatnonzero(self.active)


@dataclass
class SegmentationMap:
    """Per-pixel class ids referencing a named vocabulary."""

    labels: np.ndarray  # (H, W) int32
    vocabulary: ClassVocabulary

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.int32)
        if self.labels.ndim != 2:
            raise ValueError(f"labels must be 2-D, got shape {self.labels.shape}")
        if self.labels.size and (
            self.labels.min() < 0 or self.labels.max() >= len(self.vocabulary)
        ):
            raise ValueError("label outside vocabulary range")

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    @property
    def width(self) -> int:
        return self.labels.shape[1]


def apply_negative_policy(attention: np.ndarray, policy: str) -> np.ndarray:
    """Turn raw per-class logit maps (C, H, W) into non-negative weights."""
    if policy not in NEGATIVE_POLICIES:
        raise ValueError(f"unknown negative-logit policy {policy!r}")
    if policy == "clamp":
        return np.maximum(attention, 0.0)
    if policy == "shift":
        mins = attention.min(axis=(1, 2), keepdims=True)
        return attention - np.minimum(mins, 0.0)
    return attention


def _accumulate_weighted(
    f: FusedFeatureMap, weights: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Weighted feature sums (K, D) and weight totals (K,) for Eq.-style averaging."""
    k = weights.shape[0]
    flat_w = weights.reshape(k, -1)
    sums = flat_w @ f.pixel_matrix()
    totals = flat_w.sum(axis=1)
    return sums, totals


def representatives_from_attention(
    f: FusedFeatureMap,
    attention: np.ndarray,
    negatives: str = "clamp",
) -> RepresentativeSet:
    """Prototype per class: attention-weighted mean of the pixel features.

    `attention` is the fused per-class map (C, H, W) at the feature
    resolution; the caller resizes first.
    """
    attention = np.asarray(attention, dtype=np.float64)
    if attention.ndim != 3 or attention.shape[1:] != (f.height, f.width):
        raise ValueError(
            f"attention shape {attention.shape} does not match "
            f"features {f.height}x{f.width}"
        )
    weights = apply_negative_policy(attention, negatives)
    sums, totals = _accumulate_weighted(f, weights)
    active = np.abs(totals) >= WEIGHT_EPSILON
    vectors = np.zeros_like(sums)
    if active.any():
        vectors[active] = sums[active] / totals[active, None]
    return RepresentativeSet(vectors, totals, active)


def representatives_from_labels(
    f: FusedFeatureMap, gt: SegmentationMap
) -> RepresentativeSet:
    """Prototype per class: plain mean of features over its labeled pixels."""
    if (gt.height, gt.width) != (f.height, f.width):
        raise ValueError(
            f"label map {gt.height}x{gt.width} does not match "
            f"features {f.height}x{f.width}"
        )
    if gt.labels.size == 0:
        raise ValueError("empty label map")
    k = len(gt.vocabulary)
    flat = gt.labels.reshape(-1)
    counts = np.bincount(flat, minlength=k).astype(np.float64)
    sums = np.zeros((k, f.dim), dtype=np.float64)
    np.add.at(sums, flat, f.pixel_matrix())
    active = counts > 0
    vectors = np.zeros_like(sums)
    vectors[active] = sums[active] / counts[active, None]
    return RepresentativeSet(vectors, counts, active)


def _normalize_rows(m: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(m, axis=1)
    safe = np.where(norms > NORM_EPSILON, norms, 1.0)
    out = m / safe[:, None]
    out[norms <= NORM_EPSILON] = 0.0
    return out


def assign_labels(f: FusedFeatureMap, reps: RepresentativeSet) -> SegmentationMap:
    """Label each pixel with the most cosine-similar active prototype.

    Pixels (or prototypes) with near-zero norm contribute cosine 0; ties
    resolve to the lowest class id. Only active class ids appear in the
    output.
    """
    if reps.dim != f.dim:
        raise ValueError(f"prototype dim {reps.dim} != feature dim {f.dim}")
    active_ids = reps.active_ids()
    rhat = _normalize_rows(reps.vectors[active_ids])
    pixels = f.pixel_matrix()
    out = np.empty(pixels.shape[0], dtype=np.int32)
    for start in range(0, pixels.shape[0], _CHUNK):
        chunk = pixels[start : start + _CHUNK]
        sims = _normalize_rows(chunk) @ rhat.T
        out[start : start + _CHUNK] = active_ids[np.argmax(sims, axis=1)]
    vocab = ClassVocabulary(tuple(f"class_{i}" for i in range(reps.num_classes)))
    return SegmentationMap(out.reshape(f.height, f.width), vocab)


def segment_image(
    f: FusedFeatureMap,
    attention: np.ndarray,
    vocabulary: ClassVocabulary,
    active_subset: set[int] | None = None,
    negatives: str = "clamp",
) -> SegmentationMap:
    """Full per-image path: prototypes from attention, then cosine argmax.

    `active_subset` restricts the competing classes (the dynamic-prompt
    variant); labels in the result still use the full vocabulary's ids.
    """
    attention = np.asarray(attention, dtype=np.float64)
    if attention.shape[0] != len(vocabulary):
        raise ValueError(
            f"attention has {attention.shape[0]} classes, "
            f"vocabulary has {len(vocabulary)}"
        )
    if active_subset is not None:
        keep = sorted(active_subset)
        if not keep:
            raise NoActiveClassError("active_subset is empty")
        if keep[0] < 0 or keep[-1] >= len(vocabulary):
            raise ValueError(f"active_subset ids outside vocabulary: {keep}")
        mask = np.zeros(attention.shape[0], dtype=bool)
        mask[keep] = True
        attention = np.where(mask[:, None, None], attention, 0.0)
    reps = representatives_from_attention(f, attention, negatives=negatives)
    seg = assign_labels(f, reps)
    return SegmentationMap(seg.labels, vocabulary)
