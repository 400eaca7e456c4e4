"""Command-line entry point: fixture generation, batch segmentation,
unsupervised clustering, and evaluation.

Images larger than the patch size are processed as 512x512 tiles whose
prototype statistics are pooled per image before any pixel is labeled;
overlapping remainder tiles are anchored to the image edge and later
tiles win overlapped pixels. Every run is deterministic for a fixed
configuration, including seeds, so reruns produce bit-identical artifacts.

Exit codes: 0 success, 1 input/configuration error, 2 numerical failure
(a non-finite value in the data path).
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import synth
from .assign import (
    NEGATIVE_POLICIES,
    RepresentativeSet,
    SegmentationMap,
    apply_negative_policy,
    assign_labels,
    WEIGHT_EPSILON,
)
from .evaluate import (
    ConfusionMatrix,
    EvaluationError,
    accumulate,
    miou,
    pixel_accuracy,
    unsupervised_miou,
)
from .fusion import (
    AttentionLogitSet,
    FusedFeatureMap,
    LayerFeatureSet,
    fuse_attention,
    fuse_features,
    resize_nearest,
)
from .kmeans import kmeans_cluster
from .tensor_store import (
    ClassVocabulary,
    ManifestEntry,
    NonFiniteValueError,
    TensorStoreError,
    load_manifest,
    load_vocabulary,
    read_label_map,
    read_tensor,
    save_vocabulary,
    write_label_map,
)
from .unsup import resize_features, unsup_segment

PATCH_SIZE = 512

MODES = ("segment", "unsup", "kmeans", "eval", "synth")


class InputError(ValueError):
    """Configuration or data problem attributable to the inputs."""


def tile_plan(height: int, width: int, patch: int = PATCH_SIZE) -> list[tuple[int, int, int, int]]:
    """Non-overlapping patch grid; remainders anchored to the far edge.

    Returns (top, left, height, width) rectangles in row-major order.
    Remainder tiles overlap their predecessors so that every rectangle is
    full patch size whenever the image allows it; pixels covered twice
    belong to the later rectangle.
    """
    if height < 1 or width < 1:
        raise InputError(f"image size must be positive, got {height}x{width}")

    def starts(dim: int) -> list[int]:
        if dim <= patch:
            return [0]
        xs = list(range(0, dim - patch + 1, patch))
        if xs[-1] + patch < dim:
            xs.append(dim - patch)
        return xs

    return [
        (top, left, min(patch, height), min(patch, width))
        for top in starts(height)
        for left in starts(width)
    ]


@dataclass
class RunConfig:
    mode: str
    out: Path
    manifest: Path | None = None
    vocab: Path | None = None
    feature_sizes: tuple[int, ...] = (8, 16, 32)
    attention_sizes: tuple[int, ...] = (8, 16)
    k: int | None = None
    seed: int = 0
    match: str = "none"  # none | image | dataset
    neg_attention: str = "clamp"
    assign_res: str = "image"  # image | fused
    reps: str = "attention"  # attention | labels
    reps_scope: str = "dataset"  # dataset | image (labels-based prototypes)
    dynamic_prompts: bool = False
    laplacian: str = "sym"
    match_objective: str = "intersection"
    class_map: Path | None = None
    pred: Path | None = None
    workers: int = 1
    # synth-only knobs
    count: int = 4
    height: int = 64
    width: int = 64
    dim: int = 16
    classes: int = 4
    noise_sigma: float = 0.05
    layout: str = "voronoi"
    extra_metrics: dict = field(default_factory=dict)

    def validate(self) -> None:
        if self.mode not in MODES:
            raise InputError(f"unknown mode {self.mode!r}")
        if self.mode != "synth" and self.manifest is None:
            raise InputError(f"mode {self.mode} requires --manifest")
        if self.mode == "segment" and self.vocab is None:
            raise InputError("mode segment requires --vocab")
        if self.mode in ("unsup", "kmeans") and not self.k:
            raise InputError(f"mode {self.mode} requires --k")
        if self.mode in ("unsup", "kmeans") and self.match == "none":
            raise InputError(f"mode {self.mode} requires --match image or dataset")
        if self.mode == "eval" and self.match != "none" and not self.k:
            raise InputError("matched eval requires --k (cluster count)")
        if self.neg_attention not in NEGATIVE_POLICIES:
            raise InputError(f"--neg-attention must be one of {NEGATIVE_POLICIES}")
        if self.match not in ("none", "image", "dataset"):
            raise InputError("--match must be none, image, or dataset")
        if self.workers < 1:
            raise InputError("--workers must be >= 1")


def _image_seed(config: RunConfig, index: int) -> list[int]:
    return [config.seed, index]


def _require_finite(name: str, image_id: str, arr: np.ndarray) -> np.ndarray:
    if not np.isfinite(arr).all():
        raise NonFiniteValueError(f"{image_id}: non-finite value in {name}")
    return arr


def _load_layers(entry_refs, base: Path, sizes, image_id: str) -> LayerFeatureSet:
    chosen = [ref for ref in entry_refs if ref.height in sizes]
    if not chosen:
        raise InputError(
            f"{image_id}: no feature file at sizes {sorted(sizes)} "
            f"(available: {sorted(set(r.height for r in entry_refs))})"
        )
    layers = []
    for ref in chosen:
        dims, values = read_tensor(base / ref.path)
        if len(dims) != 3:
            raise InputError(f"{image_id}: feature file {ref.path} must be (C, h, w)")
        layers.append(_require_finite(ref.path, image_id, values.astype(np.float64)))
    return LayerFeatureSet(layers)


def _load_attention(entry_refs, base: Path, vocab: ClassVocabulary, image_id: str) -> AttentionLogitSet:
    if not entry_refs:
        raise InputError(f"{image_id}: manifest entry has no attention files")
    groups: list[list[np.ndarray]] = [[] for _ in vocab.names]
    for ref in entry_refs:
        dims, values = read_tensor(base / ref.path)
        if len(dims) != 3:
            raise InputError(f"{image_id}: attention file {ref.path} must be (C, h, w)")
        if dims[0] != len(vocab):
            raise InputError(
                f"{image_id}: attention file {ref.path} has {dims[0]} classes, "
                f"vocabulary has {len(vocab)}"
            )
        _require_finite(ref.path, image_id, values)
        for c in range(dims[0]):
            groups[c].append(values[c].astype(np.float64))
    return AttentionLogitSet(list(vocab.names), groups)


def _patches_of(entry: ManifestEntry):
    """Uniform patch view: whole-image entries become one pseudo patch."""
    if entry.patches:
        return list(entry.patches)
    from .tensor_store import PatchRef

    return [
        PatchRef(
            top=0,
            left=0,
            height=entry.height,
            width=entry.width,
            features=entry.features,
            attention=entry.attention,
        )
    ]


def _fuse_target(config: RunConfig, patch_h: int, patch_w: int) -> tuple[int, int]:
    if config.assign_res == "image":
        return (patch_h, patch_w)
    size = max(config.feature_sizes)
    return (min(size, patch_h), min(size, patch_w))


def _segment_one(
    config: RunConfig,
    entry: ManifestEntry,
    base: Path,
    vocab: ClassVocabulary,
    fixed_reps: RepresentativeSet | None,
) -> np.ndarray:
    """Label one image: pool prototype sums over patches, then assign."""
    patches = _patches_of(entry)
    active_mask = None
    if config.dynamic_prompts:
        if entry.labels is None:
            raise InputError(f"{entry.image_id}: --dynamic-prompts needs label files")
        gt = read_label_map(base / entry.labels)
        active_mask = np.zeros(len(vocab), dtype=bool)
        present = np.unique(gt)
        present = present[present < len(vocab)]
        active_mask[present] = True

    reps = fixed_reps
    if reps is None and config.reps == "labels":
        sums, counts = _label_rep_sums(config, entry, base, vocab)
        reps = _reps_from_sums(sums, counts)
    if reps is None:
        dim = None
        sums = None
        totals = np.zeros(len(vocab))
        for patch in patches:
            target = _fuse_target(config, patch.height, patch.width)
            f = fuse_features(
                _load_layers(patch.features, base, config.feature_sizes, entry.image_id),
                target,
            )
            att_set = _load_attention(patch.attention, base, vocab, entry.image_id)
            fused_att = fuse_attention(att_set, target, config.attention_sizes)
            if active_mask is not None:
                fused_att = np.where(active_mask[:, None, None], fused_att, 0.0)
            weights = apply_negative_policy(fused_att, config.neg_attention)
            flat_w = weights.reshape(len(vocab), -1)
            part = flat_w @ f.pixel_matrix()
            if sums is None:
                dim = f.dim
                sums = np.zeros((len(vocab), dim))
            elif f.dim != dim:
                raise InputError(f"{entry.image_id}: feature dim varies across patches")
            sums += part
            totals += flat_w.sum(axis=1)
        reps = _reps_from_sums(sums, totals)

    canvas = np.zeros((entry.height, entry.width), dtype=np.int32)
    for patch in patches:
        target = _fuse_target(config, patch.height, patch.width)
        f = fuse_features(
            _load_layers(patch.features, base, config.feature_sizes, entry.image_id),
            target,
        )
        seg = assign_labels(f, reps)
        labels = seg.labels
        if labels.shape != (patch.height, patch.width):
            labels = resize_nearest(labels, (patch.height, patch.width))
        canvas[patch.top : patch.top + patch.height, patch.left : patch.left + patch.width] = labels
    return canvas


def _reps_from_sums(sums: np.ndarray, totals: np.ndarray) -> RepresentativeSet:
    active = np.abs(totals) >= WEIGHT_EPSILON
    vectors = np.zeros_like(sums)
    if active.any():
        vectors[active] = sums[active] / totals[active, None]
    return RepresentativeSet(vectors, totals, active)


def _label_rep_sums(
    config: RunConfig, entry: ManifestEntry, base: Path, vocab: ClassVocabulary
) -> tuple[np.ndarray, np.ndarray]:
    """Per-class feature sums/counts from ground-truth labels, per image."""
    if entry.labels is None:
        raise InputError(f"{entry.image_id}: --reps labels needs label files")
    gt_full = read_label_map(base / entry.labels)
    if gt_full.shape != (entry.height, entry.width):
        raise InputError(
            f"{entry.image_id}: label file shape {gt_full.shape} does not match "
            f"manifest {entry.height}x{entry.width}"
        )
    k = len(vocab)
    sums = None
    counts = np.zeros(k)
    for patch in _patches_of(entry):
        target = _fuse_target(config, patch.height, patch.width)
        f = fuse_features(
            _load_layers(patch.features, base, config.feature_sizes, entry.image_id),
            target,
        )
        gt_patch = gt_full[
            patch.top : patch.top + patch.height, patch.left : patch.left + patch.width
        ]
        gt_small = resize_nearest(gt_patch, target)
        flat = gt_small.reshape(-1)
        if flat.max(initial=0) >= k:
            raise InputError(f"{entry.image_id}: label {flat.max()} outside vocabulary")
        if sums is None:
            sums = np.zeros((k, f.dim))
        np.add.at(sums, flat, f.pixel_matrix())
        counts += np.bincount(flat, minlength=k)
    return sums, counts


def _cluster_one(config: RunConfig, entry: ManifestEntry, base: Path, index: int) -> np.ndarray:
    patches = _patches_of(entry)
    # stitch fused features at assignment resolution, then cluster the image
    canvas = None
    for patch in patches:
        target = _fuse_target(config, patch.height, patch.width)
        f = fuse_features(
            _load_layers(patch.features, base, config.feature_sizes, entry.image_id),
            target,
        )
        data = f.data
        if target != (patch.height, patch.width):
            data = resize_features(f, (patch.height, patch.width)).data
        if canvas is None:
            canvas = np.zeros((entry.height, entry.width, data.shape[-1]))
        canvas[
            patch.top : patch.top + patch.height, patch.left : patch.left + patch.width
        ] = data
    fmap = FusedFeatureMap(canvas)
    seed = _image_seed(config, index)
    if config.mode == "unsup":
        cluster = unsup_segment(
            fmap,
            config.k,
            seed,
            output_resolution=(entry.height, entry.width),
            laplacian=config.laplacian,
        )
        return cluster.labels
    labels, _ = kmeans_cluster(fmap.pixel_matrix(), config.k, seed)
    return labels.reshape(entry.height, entry.width).astype(np.int32)


def _write_metrics(out: Path, lines: dict[str, float], detail: dict) -> None:
    text = "".join(f"{name} {value:.6f}\n" for name, value in lines.items())
    (out / "metrics.txt").write_text(text, encoding="utf-8")
    (out / "metrics.json").write_text(
        json.dumps(detail, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )


def _load_gt(
    entry: ManifestEntry, base: Path, class_map: dict[int, int] | None = None
) -> np.ndarray:
    if entry.labels is None:
        raise InputError(f"{entry.image_id}: manifest entry has no label file")
    gt = read_label_map(base / entry.labels)
    if gt.shape != (entry.height, entry.width):
        raise InputError(
            f"{entry.image_id}: label file shape {gt.shape} does not match "
            f"manifest {entry.height}x{entry.width}"
        )
    if class_map:
        gt = _apply_class_map(gt, class_map)
    return gt


def _apply_class_map(labels: np.ndarray, class_map: dict[int, int]) -> np.ndarray:
    table = np.arange(max(labels.max() + 1, max(class_map) + 1), dtype=np.int32)
    for src, dst in class_map.items():
        table[src] = dst
    return table[labels]


def _read_class_map(path: Path) -> dict[int, int]:
    """Editable label-grouping table: JSON object of old id -> new id."""
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
        return {int(k): int(v) for k, v in raw.items()}
    except (OSError, ValueError) as exc:
        raise InputError(f"bad class map {path}: {exc}") from exc


def _run_synth(config: RunConfig) -> None:
    out = config.out
    out.mkdir(parents=True, exist_ok=True)
    manifest_path = config.manifest or (out / "manifest.jsonl")
    vocab_path = config.vocab or (out / "vocab.txt")
    manifest_path.parent.mkdir(parents=True, exist_ok=True)
    if manifest_path.exists():
        manifest_path.unlink()
    vocab = ClassVocabulary(tuple(f"class_{c}" for c in range(config.classes)))
    save_vocabulary(vocab_path, vocab)
    for i in range(config.count):
        layers, attention, gt = synth.generate(
            _image_seed(config, i),
            config.height,
            config.width,
            config.dim,
            config.classes,
            config.noise_sigma,
            config.layout,
            feature_sizes=tuple(sorted(config.feature_sizes)),
            attention_sizes=tuple(sorted(config.attention_sizes)),
        )
        synth.write_fixture(out, manifest_path, f"synth_{i:04d}", layers, attention, gt)


def _run_segment(config: RunConfig) -> None:
    manifest = load_manifest(config.manifest)
    base = config.manifest.parent
    vocab = load_vocabulary(config.vocab)
    config.out.mkdir(parents=True, exist_ok=True)

    fixed_reps = None
    if config.reps == "labels" and config.reps_scope == "dataset":
        sums, counts = None, np.zeros(len(vocab))
        for entry in manifest:
            s, c = _label_rep_sums(config, entry, base, vocab)
            sums = s if sums is None else sums + s
            counts += c
        fixed_reps = _reps_from_sums(sums, counts)

    def work(item):
        index, entry = item
        labels = _segment_one(config, entry, base, vocab, fixed_reps)
        write_label_map(config.out / f"{entry.image_id}.seg.mdt", labels)
        return labels

    with ThreadPoolExecutor(max_workers=config.workers) as pool:
        results = list(pool.map(work, enumerate(manifest)))

    scored = [(e, r) for e, r in zip(manifest, results) if e.labels is not None]
    if scored:
        cm = ConfusionMatrix(len(vocab), len(vocab))
        for entry, pred in scored:
            accumulate(cm, _load_gt(entry, base), pred)
        ious, mean = miou(cm)
        lines = {"miou": mean, "pixel_accuracy": pixel_accuracy(cm)}
        detail = {
            "miou": mean,
            "pixel_accuracy": lines["pixel_accuracy"],
            "per_class_iou": {
                vocab.names[i]: (None if np.isnan(v) else float(v))
                for i, v in enumerate(ious)
            },
            "images": len(scored),
        }
        for key, value in config.extra_metrics.items():
            lines[key] = value
            detail[key] = value
        _write_metrics(config.out, lines, detail)


def _run_cluster(config: RunConfig) -> None:
    manifest = load_manifest(config.manifest)
    base = config.manifest.parent
    config.out.mkdir(parents=True, exist_ok=True)

    def work(item):
        index, entry = item
        labels = _cluster_one(config, entry, base, index)
        write_label_map(config.out / f"{entry.image_id}.clu.mdt", labels)
        return labels

    with ThreadPoolExecutor(max_workers=config.workers) as pool:
        results = list(pool.map(work, enumerate(manifest)))

    scored = [(e, r) for e, r in zip(manifest, results) if e.labels is not None]
    if scored:
        num_classes = max(int(_load_gt(e, base).max()) for e, _ in scored) + 1
        _matched_metrics(config, scored, base, num_classes)


def _matched_metrics(
    config: RunConfig, scored, base: Path, num_classes: int,
    class_map: dict[int, int] | None = None,
) -> None:
    """Hungarian-matched mIoU at the configured granularity."""
    detail: dict = {"match": config.match, "images": len(scored)}
    lines: dict[str, float] = {}
    if config.match == "dataset":
        cm = ConfusionMatrix(num_classes, config.k)
        for entry, pred in scored:
            accumulate(cm, _load_gt(entry, base, class_map), pred)
        mapping, mean = unsupervised_miou(cm, config.match_objective)
        lines["unsupervised_miou"] = mean
        detail["unsupervised_miou"] = mean
        detail["cluster_to_class"] = {str(k): v for k, v in sorted(mapping.items())}
    else:  # per-image matching, averaged
        per_image = {}
        for entry, pred in scored:
            cm = ConfusionMatrix(num_classes, config.k)
            accumulate(cm, _load_gt(entry, base, class_map), pred)
            _, mean = unsupervised_miou(cm, config.match_objective)
            per_image[entry.image_id] = mean
        overall = float(np.mean(list(per_image.values())))
        lines["unsupervised_miou"] = overall
        detail["unsupervised_miou"] = overall
        detail["per_image"] = per_image
    for key, value in config.extra_metrics.items():
        lines[key] = value
        detail[key] = value
    _write_metrics(config.out, lines, detail)


def _run_eval(config: RunConfig) -> None:
    manifest = load_manifest(config.manifest)
    base = config.manifest.parent
    pred_dir = config.pred or config.out
    config.out.mkdir(parents=True, exist_ok=True)
    class_map = _read_class_map(config.class_map) if config.class_map else None

    scored = []
    for entry in manifest:
        if entry.labels is None:
            continue
        candidates = [
            pred_dir / f"{entry.image_id}.seg.mdt",
            pred_dir / f"{entry.image_id}.clu.mdt",
        ]
        path = next((p for p in candidates if p.exists()), None)
        if path is None:
            raise InputError(f"{entry.image_id}: no prediction found in {pred_dir}")
        pred = read_label_map(path)
        gt = _load_gt(entry, base)
        if pred.shape != gt.shape:
            raise InputError(
                f"{entry.image_id}: prediction {pred.shape} vs labels {gt.shape}"
            )
        if class_map and config.match == "none":
            # supervised predictions share the vocabulary, so the grouping
            # applies to both sides; cluster ids are left untouched
            pred = _apply_class_map(pred, class_map)
        scored.append((entry, pred))
    if not scored:
        raise InputError("no image with both labels and a prediction")

    num_classes = max(int(_load_gt(e, base, class_map).max()) for e, _ in scored) + 1
    if config.vocab is not None and class_map is None:
        num_classes = max(num_classes, len(load_vocabulary(config.vocab)))
    if config.match == "none":
        cm = ConfusionMatrix(num_classes, num_classes)
        for entry, pred in scored:
            accumulate(cm, _load_gt(entry, base, class_map), pred)
        ious, mean = miou(cm)
        lines = {"miou": mean, "pixel_accuracy": pixel_accuracy(cm)}
        detail = {
            "miou": mean,
            "pixel_accuracy": lines["pixel_accuracy"],
            "per_class_iou": [None if np.isnan(v) else float(v) for v in ious],
            "images": len(scored),
        }
        _write_metrics(config.out, lines, detail)
    else:
        _matched_metrics(config, scored, base, num_classes, class_map)


def run(config: RunConfig) -> int:
    """Execute one configured run; returns the process exit code."""
    config.validate()
    if config.mode == "synth":
        _run_synth(config)
    elif config.mode == "segment":
        _run_segment(config)
    elif config.mode in ("unsup", "kmeans"):
        _run_cluster(config)
    else:
        _run_eval(config)
    return 0


def _parse_sizes(text: str) -> tuple[int, ...]:
    try:
        sizes = tuple(int(part) for part in text.split(",") if part.strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad size list {text!r}") from exc
    if not sizes:
        raise argparse.ArgumentTypeError("size list is empty")
    return sizes


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="protoseg",
        description="Training-free segmentation over dense feature dumps.",
    )
    parser.add_argument("--mode", required=True, choices=MODES)
    parser.add_argument("--manifest", type=Path, help="JSONL dataset manifest")
    parser.add_argument("--vocab", type=Path, help="class vocabulary file")
    parser.add_argument("--feature-sizes", type=_parse_sizes, default=(8, 16, 32),
                        metavar="8,16,32", help="feature layer sizes to fuse")
    parser.add_argument("--attention-sizes", type=_parse_sizes, default=(8, 16),
                        metavar="8,16", help="attention tap sizes to average")
    parser.add_argument("--k", type=int, help="cluster count (unsup/kmeans/matched eval)")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--match", choices=("none", "image", "dataset"), default="none",
                        help="cluster-to-class matching granularity")
    parser.add_argument("--neg-attention", choices=NEGATIVE_POLICIES, default="clamp",
                        help="treatment of negative attention logits")
    parser.add_argument("--assign-res", choices=("image", "fused"), default="image",
                        help="label at image resolution or at the fused grid")
    parser.add_argument("--reps", choices=("attention", "labels"), default="attention",
                        help="prototype source (labels = ground-truth variant)")
    parser.add_argument("--reps-scope", choices=("dataset", "image"), default="dataset",
                        help="pool label-based prototypes over the dataset or per image")
    parser.add_argument("--dynamic-prompts", action="store_true",
                        help="restrict classes to those present in each image's labels")
    parser.add_argument("--laplacian", choices=("sym", "unnormalized"), default="sym")
    parser.add_argument("--match-objective", choices=("intersection", "iou"),
                        default="intersection", help="cluster matching cost")
    parser.add_argument("--class-map", type=Path,
                        help="JSON file of label id -> grouped id, applied to gt")
    parser.add_argument("--pred", type=Path, help="directory of predictions for eval mode")
    parser.add_argument("--workers", type=int, default=1)
    parser.add_argument("--out", type=Path, required=True, help="output directory")
    # synth fixtures
    parser.add_argument("--count", type=int, default=4)
    parser.add_argument("--height", type=int, default=64)
    parser.add_argument("--width", type=int, default=64)
    parser.add_argument("--dim", type=int, default=16)
    parser.add_argument("--classes", type=int, default=4)
    parser.add_argument("--noise-sigma", type=float, default=0.05)
    parser.add_argument("--layout", choices=synth.LAYOUTS, default="voronoi")
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    return RunConfig(
        mode=args.mode,
        out=args.out,
        manifest=args.manifest,
        vocab=args.vocab,
        feature_sizes=args.feature_sizes,
        attention_sizes=args.attention_sizes,
        k=args.k,
        seed=args.seed,
        match=args.match,
        neg_attention=args.neg_attention,
        assign_res=args.assign_res,
        reps=args.reps,
        reps_scope=args.reps_scope,
        dynamic_prompts=args.dynamic_prompts,
        laplacian=args.laplacian,
        match_objective=args.match_objective,
        class_map=args.class_map,
        pred=args.pred,
        workers=args.workers,
        count=args.count,
        height=args.height,
        width=args.width,
        dim=args.dim,
        classes=args.classes,
        noise_sigma=args.noise_sigma,
        layout=args.layout,
    )


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    config = config_from_args(args)
    try:
        return run(config)
    except NonFiniteValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (InputError, TensorStoreError, EvaluationError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
