"""Resize multi-resolution feature/attention maps and combine them.

Per-layer feature maps arrive at several spatial sizes and are brought to a
common grid by bilinear interpolation, then concatenated along the channel
axis into one vector per pixel. Per-class attention logit maps from the
selected tap sizes are resized the same way and averaged with equal weights.

Interpolation convention (pinned so results are exactly testable):
source coordinate = (dst + 0.5) * src/dst - 0.5, clamped to the valid
range, i.e. half-pixel centers with edge clamping.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEFAULT_ATTENTION_SIZES = frozenset({8, 16})
DEFAULT_FEATURE_SIZES = frozenset({8, 16, 32})


def _axis_weights(n_src: int, n_dst: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Lower source index, upper source index, and upper weight per dst index."""
    dst = np.arange(n_dst, dtype=np.float64)
    src = (dst + 0.5) * (n_src / n_dst) - 0.5
    src = np.clip(src, 0.0, n_src - 1.0)
    lo = np.floor(src).astype(np.intp)
    hi = np.minimum(lo + 1, n_src - 1)
    return lo, hi, src - lo


def resize_bilinear(arr: np.ndarray, target: tuple[int, int]) -> np.ndarray:
    """Bilinear resize of the trailing two axes of `arr` to `target`.

    Accepts (h, w) or (C, h, w) input. Same-size calls pass values through
    unchanged; a 1x1 source extends its constant to every output pixel.
    """
    arr = np.asarray(arr, dtype=np.float64)
    if arr.ndim not in (2, 3):
        raise ValueError(f"expected 2-D or 3-D input, got shape {arr.shape}")
    h, w = arr.shape[-2:]
    H, W = int(target[0]), int(target[1])
    if min(h, w, H, W) < 1:
        raise ValueError(f"sizes must be >= 1, got {h}x{w} -> {H}x{W}")
    if (h, w) == (H, W):
        return arr.copy()
    y0, y1, ty = _axis_weights(h, H)
    x0, x1, tx = _axis_weights(w, W)
    ty = ty[:, None]
    tx = tx[None, :]
    a = arr[..., y0[:, None], x0[None, :]]
    b = arr[..., y0[:, None], x1[None, :]]
    c = arr[..., y1[:, None], x0[None, :]]
    d = arr[..., y1[:, None], x1[None, :]]
    top = a * (1.0 - tx) + b * tx
    bot = c * (1.0 - tx) + d * tx
    return top * (1.0 - ty) + bot * ty


def resize_nearest(arr: np.ndarray, target: tuple[int, int]) -> np.ndarray:
    """Nearest-neighbor resize of the trailing two axes (for label maps)."""
    arr = np.asarray(arr)
    h, w = arr.shape[-2:]
    H, W = int(target[0]), int(target[1])
    if min(h, w, H, W) < 1:
        raise ValueError(f"sizes must be >= 1, got {h}x{w} -> {H}x{W}")
    if (h, w) == (H, W):
        return arr.copy()
    ys = np.clip(np.rint((np.arange(H) + 0.5) * (h / H) - 0.5), 0, h - 1).astype(np.intp)
    xs = np.clip(np.rint((np.arange(W) + 0.5) * (w / W) - 0.5), 0, w - 1).astype(np.intp)
    return arr[..., ys[:, None], xs[None, :]]


@dataclass
class LayerFeatureSet:
    """Dense per-layer feature maps, each (channels, h, w), finite."""

    layers: list[np.ndarray]

    def __post_init__(self):
        if not self.layers:
            raise ValueError("at least one feature layer is required")
        checked = []
        for i, layer in enumerate(self.layers):
            layer = np.asarray(layer, dtype=np.float64)
            if layer.ndim != 3:
                raise ValueError(f"layer {i} must be (C, h, w), got shape {layer.shape}")
            if not np.isfinite(layer).all():
                raise ValueError(f"layer {i} contains non-finite values")
            checked.append(layer)
        self.layers = checked

    def sizes(self) -> list[int]:
        return [layer.shape[-2] for layer in self.layers]


@dataclass
class FusedFeatureMap:
    """Per-pixel feature vectors, stored (height, width, dim)."""

    data: np.ndarray

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.ndim != 3:
            raise ValueError(f"fused features must be (H, W, D), got {self.data.shape}")

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def dim(self) -> int:
        return self.data.shape[2]

    def pixel_matrix(self) -> np.ndarray:
        """(H*W, D) view of the per-pixel vectors."""
        return self.data.reshape(-1, self.dim)


@dataclass
class AttentionLogitSet:
    """Raw (pre-softmax) attention logit maps, grouped per class.

    `maps[c]` holds one or more 2-D logit maps for class `classes[c]`,
    typically one per tapped source resolution. Values are unbounded reals.
    """

    classes: list[str]
    maps: list[list[np.ndarray]]

    def __post_init__(self):
        if len(self.classes) != len(self.maps):
            raise ValueError("one map group per class name is required")
        self.maps = [[np.asarray(m, dtype=np.float64) for m in group] for group in self.maps]
        for name, group in zip(self.classes, self.maps):
            for m in group:
                if m.ndim != 2:
                    raise ValueError(f"attention map for {name!r} must be 2-D")


def fuse_features(layers: LayerFeatureSet, target: tuple[int, int]) -> FusedFeatureMap:
    """Resize every layer to `target` and concatenate along channels.

    Layer order is preserved, so the output dim is the sum of the input
    channel counts in listed order.
    """
    resized = [resize_bilinear(layer, target) for layer in layers.layers]
    stacked = np.concatenate(resized, axis=0)  # (sum C, H, W)
    return FusedFeatureMap(np.ascontiguousarray(np.moveaxis(stacked, 0, -1)))


def fuse_attention(
    att: AttentionLogitSet,
    target: tuple[int, int],
    selected_sizes=DEFAULT_ATTENTION_SIZES,
) -> np.ndarray:
    """Per class, mean of the selected-size logit maps resized to `target`.

    A map is selected when its height matches one of `selected_sizes`
    (tap maps are square in practice). Returns (C, H, W).
    """
    sizes = set(int(s) for s in selected_sizes)
    if not sizes:
        raise ValueError("selected_sizes must be non-empty")
    H, W = int(target[0]), int(target[1])
    out = np.empty((len(att.classes), H, W), dtype=np.float64)
    for c, (name, group) in enumerate(zip(att.classes, att.maps)):
        chosen = [m for m in group if m.shape[0] in sizes]
        if not chosen:
            raise ValueError(
                f"class {name!r} has no attention map at sizes {sorted(sizes)}"
            )
        acc = np.zeros((H, W), dtype=np.float64)
        for m in chosen:
            acc += resize_bilinear(m, (H, W))
        out[c] = acc / len(chosen)
    return out
