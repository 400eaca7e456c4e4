"""Run the frozen backbone over images and dump taps in engine format.

Each image is tiled with the same edge-anchored 512x512 rule the engine
uses, every patch gets one frozen forward pass at the configured
timestep, and the recorded taps are written as tensor files plus a
manifest entry. Attention logits are averaged over heads and over each
class's token span, one tensor per tap with the class axis in vocabulary
order; per-head tensors can additionally be dumped for research (they
stay out of the manifest so the engine's averaging is unaffected).
"""

from __future__ import annotations

import hashlib
from pathlib import Path

import numpy as np
import torch
from PIL import Image

from protoseg.cli import tile_plan
from protoseg.tensor_store import append_manifest_entry, write_tensor

from .config import PATCH_SIZE, SIZE_MULTIPLE, ExtractionConfig
from .model import ATTENTION_TAPS, FEATURE_TAPS, Recorder


def probe_shapes(config: ExtractionConfig, patch: int = PATCH_SIZE):
    """Tap names, resolutions, and channel counts for one patch size.

    Verified against a real forward pass on a dummy patch, so the table
    cannot drift from the network. Returns (rows, feature_channel_total).
    """
    model = config.build_model()
    torch.set_num_threads(1)
    txt = model.conditioner.encode(list(config.class_names) or []).embeddings
    dummy = torch.zeros(1, 3, patch, patch)
    recorder = model.run(dummy, config.timestep, txt, noise_seed=0, no_noise=True)
    rows = []
    total = 0
    for name in config.feature_taps:
        got = recorder.features[name]
        divisor, channels = FEATURE_TAPS[name]
        expected = (channels, patch // divisor, patch // divisor)
        if tuple(got.shape) != expected:
            raise AssertionError(f"tap {name}: forward gave {tuple(got.shape)}, "
                                 f"registry says {expected}")
        rows.append(("feature", name, patch // divisor, channels))
        total += channels
    for name in config.attention_taps:
        size = patch // ATTENTION_TAPS[name]
        heads, positions, tokens = recorder.attention[name].shape
        if positions != size * size:
            raise AssertionError(f"tap {name}: {positions} positions != {size}x{size}")
        rows.append(("attention", name, size, heads))
    return rows, total


def format_probe(rows, total) -> str:
    lines = [f"{'kind':<10} {'tap':<14} {'resolution':>10} {'channels/heads':>14}"]
    for kind, name, size, channels in rows:
        lines.append(f"{kind:<10} {name:<14} {size:>7}x{size:<3} {channels:>14}")
    lines.append(f"feature channels total: {total}")
    return "\n".join(lines)


def _load_image(path: str | Path) -> np.ndarray:
    """Image file -> (3, H, W) float32 in [0, 1]; .mdt tensors pass through."""
    path = Path(path)
    if path.suffix == ".mdt":
        from protoseg.tensor_store import read_tensor

        dims, values = read_tensor(path)
        if len(dims) != 3 or dims[0] != 3:
            raise ValueError(f"{path}: expected a (3, H, W) image tensor, got {dims}")
        return values.astype(np.float32)
    with Image.open(path) as img:
        rgb = np.asarray(img.convert("RGB"), dtype=np.float32) / 255.0
    return np.moveaxis(rgb, -1, 0)


def _patch_seed(noise_seed: int, image_id: str, index: int) -> int:
    digest = hashlib.blake2b(
        f"{noise_seed}:{image_id}:{index}".encode(), digest_size=8
    ).digest()
    return int.from_bytes(digest, "little") % (2**63)


def _pool_attention(logits: torch.Tensor, spans, size: int) -> np.ndarray:
    """(heads, positions, tokens) -> (classes, size, size), head+span mean."""
    mean_heads = logits.mean(dim=0)  # (positions, tokens)
    per_class = [mean_heads[:, a:b].mean(dim=1) for a, b in spans]
    stacked = torch.stack(per_class).reshape(len(spans), size, size)
    return stacked.numpy().astype(np.float32)


def extract(config: ExtractionConfig, image_path: str | Path, image_id: str) -> dict:
    """Extract one image; write tensors + manifest entry; return the entry."""
    torch.set_num_threads(1)  # keeps repeated runs byte-identical
    model = config.build_model()
    return extract_with_model(model, config, image_path, image_id)


def extract_with_model(
    model, config: ExtractionConfig, image_path: str | Path, image_id: str
) -> dict:
    """Like `extract`, reusing an already-built model across images."""
    image = _load_image(image_path)
    _, height, width = image.shape
    if height % SIZE_MULTIPLE or width % SIZE_MULTIPLE:
        raise ValueError(
            f"{image_id}: image sides must be multiples of {SIZE_MULTIPLE} "
            f"(got {height}x{width}); resize or pad upstream"
        )
    config.out_dir.mkdir(parents=True, exist_ok=True)
    encoding = (
        model.conditioner.encode(list(config.class_names))
        if config.class_names
        else model.conditioner.encode([])
    )

    tiles = tile_plan(height, width, PATCH_SIZE)
    patch_entries = []
    for index, (top, left, ph, pw) in enumerate(tiles):
        crop = image[:, top : top + ph, left : left + pw]
        seed = _patch_seed(config.noise_seed, image_id, index)
        recorder = model.run(
            torch.from_numpy(crop)[None],
            config.timestep,
            encoding.embeddings,
            noise_seed=seed,
            no_noise=config.no_noise,
        )
        prefix = f"{image_id}.p{index}" if len(tiles) > 1 else image_id
        patch_entries.append(
            _write_patch(config, recorder, encoding, prefix, (top, left, ph, pw))
        )

    entry: dict = {"image_id": image_id, "height": height, "width": width}
    if len(patch_entries) == 1:
        entry.update(
            features=patch_entries[0]["features"],
            attention=patch_entries[0]["attention"] or None,
        )
        if not entry["attention"]:
            entry.pop("attention")
    else:
        entry["patches"] = patch_entries
    entry["meta"] = {
        "model": config.model,
        "timestep": config.timestep,
        "noise_seed": config.noise_seed,
        "no_noise": config.no_noise,
        "torch": torch.__version__,
    }
    append_manifest_entry(config.manifest, entry)
    return entry


def _write_patch(config, recorder: Recorder, encoding, prefix: str, rect) -> dict:
    top, left, ph, pw = rect
    manifest_dir = Path(config.manifest).parent
    out = config.out_dir

    def ref(path: Path, size: int) -> dict:
        rel = path.relative_to(manifest_dir) if path.is_relative_to(manifest_dir) else path
        return {"path": str(rel), "height": size, "width": size}

    feature_refs = []
    taps = sorted(config.feature_taps, key=lambda t: ph // FEATURE_TAPS[t][0])
    for name in taps:
        tensor = recorder.features[name].numpy().astype(np.float32)
        path = out / f"{prefix}.{name}.mdt"
        write_tensor(path, tensor.shape, tensor)
        feature_refs.append(ref(path, tensor.shape[-1]))

    attention_refs = []
    if encoding.spans:
        ataps = sorted(config.attention_taps, key=lambda t: ph // ATTENTION_TAPS[t])
        for name in ataps:
            size = ph // ATTENTION_TAPS[name]
            pooled = _pool_attention(recorder.attention[name], encoding.spans, size)
            path = out / f"{prefix}.{name}.mdt"
            write_tensor(path, pooled.shape, pooled)
            attention_refs.append(ref(path, size))
            if config.per_head:
                per_head = recorder.attention[name].numpy().astype(np.float32)
                heads = per_head.shape[0]
                # research dump, deliberately not referenced by the manifest
                write_tensor(
                    out / f"{prefix}.{name}.heads.mdt",
                    (heads, per_head.shape[1], per_head.shape[2]),
                    per_head,
                )

    patch_entry = {
        "top": top,
        "left": left,
        "height": ph,
        "width": pw,
        "features": feature_refs,
        "attention": attention_refs,
    }
    return patch_entry
