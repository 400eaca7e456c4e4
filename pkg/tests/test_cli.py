import json
from pathlib import Path

import numpy as np
import pytest

from protoseg import cli
from protoseg.tensor_store import (
    append_manifest_entry,
    read_label_map,
    write_tensor,
)


def test_tile_plan_exact_fit():
    assert cli.tile_plan(512, 512) == [(0, 0, 512, 512)]


def test_tile_plan_two_side_by_side():
    assert cli.tile_plan(512, 1024) == [(0, 0, 512, 512), (0, 512, 512, 512)]


def test_tile_plan_remainders_anchor_to_edge():
    # 600x900: remainder rows start at 600-512=88, columns at 900-512=388
    assert cli.tile_plan(600, 900) == [
        (0, 0, 512, 512),
        (0, 388, 512, 512),
        (88, 0, 512, 512),
        (88, 388, 512, 512),
    ]


def test_tile_plan_small_image_single_tile():
    assert cli.tile_plan(64, 64) == [(0, 0, 64, 64)]


def test_tile_plan_covers_every_pixel(rng):
    for _ in range(25):
        h = int(rng.integers(1, 1500))
        w = int(rng.integers(1, 1500))
        cover = np.zeros((min(h, 64), 1), dtype=bool)  # placeholder, replaced below
        cover = np.zeros((h, w), dtype=bool)
        for top, left, ph, pw in cli.tile_plan(h, w):
            assert 0 <= top and 0 <= left
            assert top + ph <= h and left + pw <= w
            cover[top : top + ph, left : left + pw] = True
        assert cover.all()


def _run(args):
    return cli.main(args)


def test_synth_segment_eval_closed_loop(tmp_path):
    fix = tmp_path / "fixtures"
    out = tmp_path / "seg"
    assert _run([
        "--mode", "synth", "--out", str(fix), "--count", "2",
        "--height", "48", "--width", "48", "--dim", "12", "--classes", "3",
        "--noise-sigma", "0", "--layout", "stripes", "--seed", "5",
    ]) == 0
    assert _run([
        "--mode", "segment", "--manifest", str(fix / "manifest.jsonl"),
        "--vocab", str(fix / "vocab.txt"), "--out", str(out), "--seed", "5",
    ]) == 0
    metrics = dict(
        line.split() for line in (out / "metrics.txt").read_text().splitlines()
    )
    assert float(metrics["miou"]) == 1.0
    assert float(metrics["pixel_accuracy"]) == 1.0
    # separate eval mode reproduces the same numbers from the artifacts
    ev = tmp_path / "eval"
    assert _run([
        "--mode", "eval", "--manifest", str(fix / "manifest.jsonl"),
        "--pred", str(out), "--out", str(ev),
        "--vocab", str(fix / "vocab.txt"),
    ]) == 0
    detail = json.loads((ev / "metrics.json").read_text())
    assert detail["miou"] == 1.0


def test_unsup_mode_reports_matched_miou(tmp_path):
    fix = tmp_path / "fixtures"
    out = tmp_path / "clu"
    assert _run([
        "--mode", "synth", "--out", str(fix), "--count", "1",
        "--height", "40", "--width", "40", "--dim", "9", "--classes", "3",
        "--noise-sigma", "0.02", "--layout", "stripes", "--seed", "3",
    ]) == 0
    assert _run([
        "--mode", "unsup", "--manifest", str(fix / "manifest.jsonl"),
        "--k", "3", "--match", "dataset", "--out", str(out), "--seed", "3",
    ]) == 0
    labels = read_label_map(out / "synth_0000.clu.mdt")
    assert labels.shape == (40, 40)
    assert len(np.unique(labels)) == 3
    detail = json.loads((out / "metrics.json").read_text())
    assert detail["unsupervised_miou"] >= 0.95


def test_kmeans_mode_runs(tmp_path):
    fix = tmp_path / "fixtures"
    out = tmp_path / "km"
    assert _run([
        "--mode", "synth", "--out", str(fix), "--count", "1",
        "--height", "32", "--width", "32", "--dim", "8", "--classes", "2",
        "--noise-sigma", "0.02", "--layout", "stripes", "--seed", "1",
    ]) == 0
    assert _run([
        "--mode", "kmeans", "--manifest", str(fix / "manifest.jsonl"),
        "--k", "2", "--match", "image", "--out", str(out), "--seed", "1",
    ]) == 0
    detail = json.loads((out / "metrics.json").read_text())
    assert detail["unsupervised_miou"] >= 0.95


def test_identical_config_bit_identical_artifacts(tmp_path):
    outputs = []
    for name in ("a", "b"):
        root = tmp_path / name
        fix = root / "fix"
        seg = root / "seg"
        assert _run([
            "--mode", "synth", "--out", str(fix), "--count", "2",
            "--height", "32", "--width", "32", "--dim", "8", "--classes", "2",
            "--noise-sigma", "0.05", "--seed", "11",
        ]) == 0
        assert _run([
            "--mode", "segment", "--manifest", str(fix / "manifest.jsonl"),
            "--vocab", str(fix / "vocab.txt"), "--out", str(seg), "--seed", "11",
        ]) == 0
        blobs = {
            p.name: p.read_bytes()
            for p in sorted(list(fix.iterdir()) + list(seg.iterdir()))
            if p.is_file()
        }
        outputs.append(blobs)
    assert outputs[0].keys() == outputs[1].keys()
    for name in outputs[0]:
        assert outputs[0][name] == outputs[1][name], name


def test_eval_mode_mismatched_resolution_fails(tmp_path, capsys):
    fix = tmp_path / "fix"
    assert _run([
        "--mode", "synth", "--out", str(fix), "--count", "1",
        "--height", "16", "--width", "16", "--dim", "6", "--classes", "2",
        "--noise-sigma", "0", "--layout", "stripes",
    ]) == 0
    pred_dir = tmp_path / "pred"
    pred_dir.mkdir()
    write_tensor(pred_dir / "synth_0000.seg.mdt", [8, 8], np.zeros(64))
    code = _run([
        "--mode", "eval", "--manifest", str(fix / "manifest.jsonl"),
        "--pred", str(pred_dir), "--out", str(tmp_path / "ev"),
    ])
    assert code == 1
    assert "synth_0000" in capsys.readouterr().err


def test_missing_input_names_image(tmp_path, capsys):
    manifest = tmp_path / "manifest.jsonl"
    append_manifest_entry(manifest, {"image_id": "ghost", "height": 8, "width": 8})
    code = _run([
        "--mode", "segment", "--manifest", str(manifest),
        "--vocab", str(tmp_path / "vocab.txt"), "--out", str(tmp_path / "out"),
    ])
    assert code == 1  # vocab missing -> input error before any image work
    vocab = tmp_path / "vocab.txt"
    vocab.write_text("a\nb\n")
    code = _run([
        "--mode", "segment", "--manifest", str(manifest),
        "--vocab", str(vocab), "--out", str(tmp_path / "out"),
    ])
    assert code == 1
    assert "ghost" in capsys.readouterr().err


def test_non_finite_input_exits_2(tmp_path, capsys):
    feat = tmp_path / "img.feat8.mdt"
    # write valid, then corrupt one payload float to NaN
    write_tensor(feat, [2, 8, 8], np.zeros(128))
    raw = bytearray(feat.read_bytes())
    raw[-4:] = np.array([np.nan], dtype="<f4").tobytes()
    feat.write_bytes(bytes(raw))
    att = tmp_path / "img.att8.mdt"
    write_tensor(att, [2, 8, 8], np.ones(128))
    vocab = tmp_path / "vocab.txt"
    vocab.write_text("a\nb\n")
    manifest = tmp_path / "manifest.jsonl"
    append_manifest_entry(manifest, {
        "image_id": "img", "height": 8, "width": 8,
        "features": [{"path": "img.feat8.mdt", "height": 8, "width": 8}],
        "attention": [{"path": "img.att8.mdt", "height": 8, "width": 8}],
    })
    code = _run([
        "--mode", "segment", "--manifest", str(manifest),
        "--vocab", str(vocab), "--out", str(tmp_path / "out"),
    ])
    assert code == 2
    assert "non-finite" in capsys.readouterr().err


def test_mode_required_fields():
    with pytest.raises(cli.InputError):
        cli.RunConfig(mode="unsup", out=Path("x"), manifest=Path("m")).validate()
    with pytest.raises(cli.InputError):
        cli.RunConfig(mode="segment", out=Path("x"), manifest=Path("m")).validate()
    with pytest.raises(cli.InputError):
        cli.RunConfig(mode="nope", out=Path("x")).validate()


def _patch_fixture(tmp_path, rng):
    """A 64x96 image split into two 64x64 patches with a 32px overlap."""
    vocab = tmp_path / "vocab.txt"
    vocab.write_text("left\nright\n")
    protos = np.eye(2)
    region = np.zeros((64, 96), dtype=np.int32)
    region[:, 48:] = 1
    full = protos[region]
    patches = []
    for pi, (top, left, ph, pw) in enumerate(cli.tile_plan(64, 96, patch=64)):
        crop = full[top : top + ph, left : left + pw]
        chw = np.moveaxis(crop, -1, 0)
        feat_path = tmp_path / f"img.p{pi}.feat.mdt"
        write_tensor(feat_path, chw.shape, chw)
        att = np.stack([
            (crop[..., 0] > 0.5).astype(float),
            (crop[..., 1] > 0.5).astype(float),
        ])
        att_small = att[:, ::8, ::8]  # 8x8 grid of the 64x64 patch
        att_path = tmp_path / f"img.p{pi}.att.mdt"
        write_tensor(att_path, att_small.shape, att_small)
        patches.append({
            "top": top, "left": left, "height": ph, "width": pw,
            "features": [{"path": feat_path.name, "height": ph, "width": pw}],
            "attention": [{"path": att_path.name, "height": 8, "width": 8}],
        })
    gt_path = tmp_path / "img.gt.mdt"
    write_tensor(gt_path, region.shape, region.astype(np.float32))
    manifest = tmp_path / "manifest.jsonl"
    append_manifest_entry(manifest, {
        "image_id": "img", "height": 64, "width": 96,
        "patches": patches, "labels": gt_path.name,
    })
    return manifest, vocab, region


def test_tiled_image_pools_prototypes_across_patches(tmp_path, rng):
    manifest, vocab, region = _patch_fixture(tmp_path, rng)
    out = tmp_path / "out"
    assert _run([
        "--mode", "segment", "--manifest", str(manifest), "--vocab", str(vocab),
        "--out", str(out), "--feature-sizes", "64", "--attention-sizes", "8",
    ]) == 0
    pred = read_label_map(out / "img.seg.mdt")
    assert pred.shape == (64, 96)
    assert (pred == region).mean() == 1.0


def test_dynamic_prompts_restrict_classes(tmp_path):
    fix = tmp_path / "fix"
    assert _run([
        "--mode", "synth", "--out", str(fix), "--count", "1",
        "--height", "32", "--width", "32", "--dim", "8", "--classes", "2",
        "--noise-sigma", "0", "--layout", "stripes",
    ]) == 0
    # extend the vocabulary with a class that never occurs
    vocab_path = fix / "vocab.txt"
    manifest = fix / "manifest.jsonl"
    out = tmp_path / "out"
    assert _run([
        "--mode", "segment", "--manifest", str(manifest), "--vocab", str(vocab_path),
        "--out", str(out), "--dynamic-prompts",
    ]) == 0
    detail = json.loads((out / "metrics.json").read_text())
    assert detail["miou"] == 1.0


def test_unsup_large_k_writes_maps_and_report(tmp_path):
    fix = tmp_path / "fix"
    out = tmp_path / "out"
    assert _run([
        "--mode", "synth", "--out", str(fix), "--count", "1",
        "--height", "32", "--width", "32", "--dim", "8", "--classes", "4",
        "--noise-sigma", "0.05", "--seed", "2",
    ]) == 0
    assert _run([
        "--mode", "unsup", "--manifest", str(fix / "manifest.jsonl"),
        "--k", "27", "--match", "dataset", "--out", str(out), "--seed", "2",
    ]) == 0
    labels = read_label_map(out / "synth_0000.clu.mdt")
    assert labels.min() >= 0 and labels.max() < 27
    assert (out / "metrics.txt").read_text().startswith("unsupervised_miou")


def test_eval_class_map_groups_labels(tmp_path):
    fix = tmp_path / "fix"
    assert _run([
        "--mode", "synth", "--out", str(fix), "--count", "1",
        "--height", "32", "--width", "32", "--dim", "8", "--classes", "4",
        "--noise-sigma", "0", "--layout", "stripes", "--seed", "6",
    ]) == 0
    seg = tmp_path / "seg"
    assert _run([
        "--mode", "segment", "--manifest", str(fix / "manifest.jsonl"),
        "--vocab", str(fix / "vocab.txt"), "--out", str(seg),
    ]) == 0
    cmap = tmp_path / "groups.json"
    cmap.write_text(json.dumps({"2": 0, "3": 1}))
    ev = tmp_path / "ev"
    assert _run([
        "--mode", "eval", "--manifest", str(fix / "manifest.jsonl"),
        "--pred", str(seg), "--out", str(ev), "--class-map", str(cmap),
    ]) == 0
    detail = json.loads((ev / "metrics.json").read_text())
    assert detail["miou"] == 1.0  # grouping applied to both sides
    assert len(detail["per_class_iou"]) == 2


def test_gt_representatives_variant(tmp_path):
    fix = tmp_path / "fix"
    assert _run([
        "--mode", "synth", "--out", str(fix), "--count", "2",
        "--height", "32", "--width", "32", "--dim", "8", "--classes", "2",
        "--noise-sigma", "0.01", "--layout", "stripes",
    ]) == 0
    for scope in ("dataset", "image"):
        out = tmp_path / f"out_{scope}"
        assert _run([
            "--mode", "segment", "--manifest", str(fix / "manifest.jsonl"),
            "--vocab", str(fix / "vocab.txt"), "--out", str(out),
            "--reps", "labels", "--reps-scope", scope,
        ]) == 0
        detail = json.loads((out / "metrics.json").read_text())
        assert detail["miou"] >= 0.99
