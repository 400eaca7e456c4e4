"""Deterministic synthetic fixtures with known pixel-level ground truth.

A planted scene assigns each pixel one of K regions (stripes, blobs, or
voronoi cells) and each region an orthonormal prototype vector. Features
are the per-pixel prototype plus Gaussian noise, emitted as multi-scale
downsampled layers so the fusion path is exercised; attention logits are
the region indicator plus noise at the usual tap sizes. The region map
doubles as the oracle for end-to-end tests, with no model in the loop.

Everything is a pure function of the seed: identical arguments give
byte-identical tensors.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .assign import SegmentationMap
from .fusion import AttentionLogitSet, LayerFeatureSet, resize_bilinear
from .tensor_store import ClassVocabulary, append_manifest_entry, write_label_map, write_tensor

LAYOUTS = ("stripes", "blobs", "voronoi")
FEATURE_SIZES = (8, 16, 32)
ATTENTION_SIZES = (8, 16)
PROTOTYPE_COSINE_BOUND = 0.5


@dataclass
class PlantedScene:
    """Ground truth underlying one synthetic image."""

    height: int
    width: int
    region: np.ndarray  # (H, W) planted class ids
    prototypes: np.ndarray  # (K, D) unit rows, pairwise cosine <= 0.5
    noise_sigma: float

    def __post_init__(self):
        gram = self.prototypes @ self.prototypes.T
        off = gram - np.diag(np.diagonal(gram))
        if np.abs(off).max(initial=0.0) > PROTOTYPE_COSINE_BOUND + 1e-9:
            raise ValueError("prototype pair violates the cosine separation bound")

    @property
    def num_classes(self) -> int:
        return self.prototypes.shape[0]


def _prototypes(rng: np.random.Generator, classes: int, dim: int) -> np.ndarray:
    """Orthonormal rows: random unit vectors pushed to zero pairwise cosine."""
    if classes > dim:
        raise ValueError(f"cannot separate {classes} prototypes in {dim} dimensions")
    q, _ = np.linalg.qr(rng.standard_normal((dim, classes)))
    protos = q.T
    signs = np.sign(protos[np.arange(classes), np.argmax(np.abs(protos), axis=1)])
    return protos * signs[:, None]


def _spread_points(
    rng: np.random.Generator, count: int, height: int, width: int
) -> np.ndarray:
    """`count` seed points, rejection-sampled for minimum separation."""
    min_sep = 0.5 * min(height, width) / np.sqrt(count)
    while True:
        pts = np.column_stack(
            [rng.uniform(0, height, count), rng.uniform(0, width, count)]
        )
        d = np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=2)
        d[np.diag_indices(count)] = np.inf
        if d.min() >= min_sep:
            return pts
        min_sep *= 0.9  # relax until a configuration fits


def _region_map(
    rng: np.random.Generator, layout: str, height: int, width: int, classes: int
) -> np.ndarray:
    if layout == "stripes":
        if classes > height:
            raise ValueError(f"{classes} stripes do not fit {height} rows")
        rows = np.arange(height)
        return np.repeat((rows * classes // height)[:, None], width, axis=1)
    ys, xs = np.mgrid[0:height, 0:width]
    grid = np.stack([ys.ravel(), xs.ravel()], axis=1).astype(np.float64)
    pts = _spread_points(rng, classes, height, width)
    d2 = ((grid[:, None, :] - pts[None, :, :]) ** 2).sum(axis=2)
    if layout == "voronoi":
        return np.argmin(d2, axis=1).astype(np.int32).reshape(height, width)
    if layout == "blobs":
        radii = rng.uniform(0.35, 0.7, classes) * min(height, width) / np.sqrt(classes)
        scores = d2 / (radii[None, :] ** 2)
        return np.argmin(scores, axis=1).astype(np.int32).reshape(height, width)
    raise ValueError(f"unknown layout {layout!r}; expected one of {LAYOUTS}")


def _split_channels(dim: int, n_layers: int) -> list[int]:
    """Channel counts per layer, weighting the finest layer heaviest.

    The finest layer carries the boundary detail the coarse layers blur
    away, so it receives roughly half the channels.
    """
    if dim < n_layers:
        raise ValueError(f"need at least {n_layers} channels, got {dim}")
    weights = np.array([1.0] * (n_layers - 1) + [float(n_layers - 1 or 1)])
    counts = np.maximum(1, np.floor(dim * weights / weights.sum()).astype(int))
    counts[-1] += dim - counts.sum()
    if counts[-1] < 1:  # tiny dim: fall back to an even split
        counts = np.full(n_layers, dim // n_layers)
        counts[: dim % n_layers] += 1
    return counts.tolist()


def generate_scene(
    rng: np.random.Generator,
    height: int,
    width: int,
    dim: int,
    classes: int,
    noise_sigma: float,
    layout: str,
) -> PlantedScene:
    if classes < 1:
        raise ValueError("classes must be >= 1")
    if noise_sigma < 0:
        raise ValueError("noise_sigma must be >= 0")
    protos = _prototypes(rng, classes, dim)
    region = _region_map(rng, layout, height, width, classes)
    return PlantedScene(height, width, region, protos, noise_sigma)


def generate(
    seed,
    height: int,
    width: int,
    dim: int,
    classes: int,
    noise_sigma: float,
    layout: str = "voronoi",
    feature_sizes: tuple[int, ...] = FEATURE_SIZES,
    attention_sizes: tuple[int, ...] = ATTENTION_SIZES,
) -> tuple[LayerFeatureSet, AttentionLogitSet, SegmentationMap]:
    """One synthetic image: multi-scale features, attention logits, truth.

    Features are prototype(region) + N(0, sigma^2), split channelwise
    across the requested layer sizes and bilinearly downsampled; attention
    for each class is its region indicator + N(0, sigma^2) at each tap
    size. Deterministic per seed.
    """
    rng = np.random.default_rng(seed)
    scene = generate_scene(rng, height, width, dim, classes, noise_sigma, layout)

    full = scene.prototypes[scene.region]  # (H, W, D)
    if noise_sigma > 0:
        full = full + noise_sigma * rng.standard_normal(full.shape)
    chw = np.moveaxis(full, -1, 0)

    sizes = sorted(int(s) for s in feature_sizes)
    splits = _split_channels(dim, len(sizes))
    layers = []
    offset = 0
    for size, channels in zip(sizes, splits):
        block = chw[offset : offset + channels]
        layers.append(resize_bilinear(block, (size, size)))
        offset += channels

    names = [f"class_{c}" for c in range(classes)]
    att_sizes = sorted(int(s) for s in attention_sizes)
    maps: list[list[np.ndarray]] = []
    for c in range(classes):
        indicator = (scene.region == c).astype(np.float64)
        group = []
        for size in att_sizes:
            logit = resize_bilinear(indicator, (size, size))
            if noise_sigma > 0:
                logit = logit + noise_sigma * rng.standard_normal(logit.shape)
            group.append(logit)
        maps.append(group)

    vocab = ClassVocabulary(tuple(names))
    gt = SegmentationMap(scene.region, vocab)
    return LayerFeatureSet(layers), AttentionLogitSet(names, maps), gt


def write_fixture(
    out_dir: str | Path,
    manifest_path: str | Path,
    image_id: str,
    layers: LayerFeatureSet,
    attention: AttentionLogitSet | None,
    gt: SegmentationMap | None,
) -> None:
    """Persist one generated image through the tensor store.

    Feature files land as <id>.feat<size>.mdt, attention as
    <id>.att<size>.mdt (class axis in vocabulary order), ground truth as
    <id>.gt.mdt, plus one manifest record. Paths in the manifest are
    relative to the manifest's directory.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest_dir = Path(manifest_path).parent

    entry: dict = {"image_id": image_id}
    feature_refs = []
    for layer in layers.layers:
        c, h, w = layer.shape
        path = out_dir / f"{image_id}.feat{h}.mdt"
        write_tensor(path, layer.shape, layer.astype(np.float32))
        feature_refs.append(
            {"path": str(path.relative_to(manifest_dir)), "height": h, "width": w}
        )
    entry["features"] = feature_refs

    if attention is not None and attention.classes:
        att_refs = []
        by_size: dict[int, list[np.ndarray]] = {}
        for group in attention.maps:
            for m in group:
                by_size.setdefault(m.shape[0], []).append(m)
        for size in sorted(by_size):
            stack = np.stack(by_size[size])  # (C, s, s) in class order
            path = out_dir / f"{image_id}.att{size}.mdt"
            write_tensor(path, stack.shape, stack.astype(np.float32))
            att_refs.append(
                {"path": str(path.relative_to(manifest_dir)), "height": size, "width": size}
            )
        entry["attention"] = att_refs

    if gt is not None:
        gt_path = out_dir / f"{image_id}.gt.mdt"
        write_label_map(gt_path, gt.labels)
        entry["labels"] = str(gt_path.relative_to(manifest_dir))
        entry["height"], entry["width"] = gt.height, gt.width
    else:
        # infer the nominal resolution from the finest feature layer
        finest = max(layers.layers, key=lambda a: a.shape[-1])
        entry["height"], entry["width"] = finest.shape[-2], finest.shape[-1]

    append_manifest_entry(manifest_path, entry)
