"""Extraction configuration and the model registry.

Only in-process model builders live in the registry here; pointing
`model` at an on-disk checkpoint directory is the documented extension
path once pretrained weights are available.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from .model import (
    ATTENTION_TAPS,
    DEFAULT_ATTENTION_TAPS,
    DEFAULT_FEATURE_TAPS,
    FEATURE_TAPS,
    FrozenBackbone,
)

MODEL_REGISTRY = {"tiny-1024": FrozenBackbone}

PATCH_SIZE = 512
SIZE_MULTIPLE = 64  # latent /8 and UNet /8 need inputs divisible by this


class ModelLoadError(RuntimeError):
    pass


class TapError(ValueError):
    pass


@dataclass
class ExtractionConfig:
    out_dir: Path
    model: str = "tiny-1024"
    timestep: int = 1
    class_names: tuple[str, ...] = ()
    feature_taps: tuple[str, ...] = DEFAULT_FEATURE_TAPS
    attention_taps: tuple[str, ...] = DEFAULT_ATTENTION_TAPS
    noise_seed: int = 0
    no_noise: bool = False
    per_head: bool = False
    manifest: Path | None = None

    def __post_init__(self):
        self.out_dir = Path(self.out_dir)
        if self.manifest is None:
            self.manifest = self.out_dir / "manifest.jsonl"
        if not 1 <= self.timestep <= 1000:
            raise ValueError(f"timestep must lie in [1, 1000], got {self.timestep}")
        bad = [t for t in self.feature_taps if t not in FEATURE_TAPS]
        if bad or not self.feature_taps:
            raise TapError(
                f"unknown feature taps {bad}; valid taps: {sorted(FEATURE_TAPS)}"
            )
        bad = [t for t in self.attention_taps if t not in ATTENTION_TAPS]
        if bad:
            raise TapError(
                f"unknown attention taps {bad}; valid taps: {sorted(ATTENTION_TAPS)}"
            )

    def build_model(self):
        builder = MODEL_REGISTRY.get(self.model)
        if builder is None:
            raise ModelLoadError(
                f"unknown model {self.model!r}; available: {sorted(MODEL_REGISTRY)}"
            )
        return builder()
