"""Command line for the extractor.

`probe` prints the tap table (names, resolutions, channel counts);
`run` extracts one or more images into tensor files plus a manifest the
segmentation engine consumes directly.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from protoseg.tensor_store import load_vocabulary

from .config import ExtractionConfig, ModelLoadError, TapError
from .extract import extract_with_model, format_probe, probe_shapes
from .text import PromptTooLongError


def _taps(text: str) -> tuple[str, ...]:
    return tuple(part.strip() for part in text.split(",") if part.strip())


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="protoseg-extract",
        description="Dump frozen-model features and cross-attention for protoseg.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--model", default="tiny-1024")
    common.add_argument("--timestep", type=int, default=1,
                        help="diffusion timestep for the forward pass (1..1000)")
    common.add_argument("--vocab", type=Path,
                        help="class vocabulary file; omit for promptless extraction")
    common.add_argument("--feature-taps", type=_taps, default=None,
                        metavar="mid8,up16,up32")
    common.add_argument("--attention-taps", type=_taps, default=None,
                        metavar="attn_down8,attn_mid8,attn_down16,attn_up16")
    common.add_argument("--seed", type=int, default=0, help="noise seed")
    common.add_argument("--no-noise", action="store_true",
                        help="feed the clean latent instead of noising to t")
    common.add_argument("--out", type=Path, required=True)

    probe = sub.add_parser("probe", parents=[common],
                           help="print tap names, resolutions, channel counts")
    probe.add_argument("--patch", type=int, default=512)

    run = sub.add_parser("run", parents=[common], help="extract images")
    run.add_argument("--manifest", type=Path, default=None)
    run.add_argument("--per-head", action="store_true",
                     help="additionally dump per-head attention tensors")
    run.add_argument("images", nargs="+", type=Path,
                     help="image files (png/jpg/... or (3,H,W) .mdt tensors)")
    return parser


def _config(args) -> ExtractionConfig:
    class_names: tuple[str, ...] = ()
    if args.vocab is not None:
        class_names = load_vocabulary(args.vocab).names
    kwargs = dict(
        out_dir=args.out,
        model=args.model,
        timestep=args.timestep,
        class_names=class_names,
        noise_seed=args.seed,
        no_noise=args.no_noise,
    )
    if args.feature_taps is not None:
        kwargs["feature_taps"] = args.feature_taps
    if args.attention_taps is not None:
        kwargs["attention_taps"] = args.attention_taps
    if getattr(args, "manifest", None) is not None:
        kwargs["manifest"] = args.manifest
    if getattr(args, "per_head", False):
        kwargs["per_head"] = True
    return ExtractionConfig(**kwargs)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = _config(args)
        if args.command == "probe":
            rows, total = probe_shapes(config, patch=args.patch)
            print(format_probe(rows, total))
            return 0
        model = config.build_model()
        for image in args.images:
            entry = extract_with_model(model, config, image, image.stem)
            n_feat = len(entry.get("features", [])) or sum(
                len(p["features"]) for p in entry.get("patches", [])
            )
            print(f"{entry['image_id']}: {n_feat} feature tensors -> {config.out_dir}")
        return 0
    except (ModelLoadError, TapError, PromptTooLongError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
