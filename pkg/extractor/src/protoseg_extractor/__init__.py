"""Feature/attention extractor for the protoseg engine.

Runs a frozen latent-diffusion-style model once per 512x512 patch at a
chosen timestep, captures per-layer UNet feature maps and pre-softmax
cross-attention logits, pools the logits per class name, and writes
everything through the engine's tensor store with a manifest entry.
"""

from .config import ExtractionConfig, MODEL_REGISTRY
from .extract import extract, probe_shapes
from .text import TextConditioner, PromptTooLongError

__version__ = "0.1.0"

__all__ = [
    "ExtractionConfig",
    "MODEL_REGISTRY",
    "extract",
    "probe_shapes",
    "TextConditioner",
    "PromptTooLongError",
]
