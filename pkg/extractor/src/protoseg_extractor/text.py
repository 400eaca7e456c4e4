"""Deterministic text conditioning without downloadable weights.

Class names are tokenized on whitespace; every token maps to a fixed
embedding vector derived from a hash of its text, so the conditioning is
a pure function of the prompt. The per-class token spans are recorded so
attention logits can later be pooled per class. An empty class list
yields just the sentinel tokens (the promptless mode).
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np
import torch

TOKEN_LIMIT = 77  # matches the usual text-encoder context window
BOS, EOS = "<s>", "</s>"


class PromptTooLongError(ValueError):
    """Prompt exceeds the token limit; carries the classes that overflow."""


def _token_vector(token: str, dim: int) -> np.ndarray:
    digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest()
    rng = np.random.default_rng(int.from_bytes(digest, "little"))
    return rng.standard_normal(dim)


def _position_encoding(length: int, dim: int) -> np.ndarray:
    pos = np.arange(length)[:, None]
    freq = np.exp(-np.log(10000.0) * np.arange(0, dim, 2) / dim)[None, :]
    enc = np.zeros((length, dim))
    enc[:, 0::2] = np.sin(pos * freq)
    enc[:, 1::2] = np.cos(pos * freq)
    return enc


@dataclass
class PromptEncoding:
    embeddings: torch.Tensor  # (1, T, dim) float32
    spans: list[tuple[int, int]]  # per class: [start, end) token range
    tokens: list[str]


class TextConditioner:
    def __init__(self, dim: int = 64):
        self.dim = dim

    def encode(self, class_names: list[str]) -> PromptEncoding:
        tokens = [BOS]
        spans = []
        overflow = []
        for name in class_names:
            words = name.lower().split()
            if not words:
                raise ValueError(f"empty class name in prompt: {class_names}")
            start = len(tokens)
            tokens.extend(words)
            spans.append((start, len(tokens)))
            if len(tokens) + 1 > TOKEN_LIMIT:
                overflow.append(name)
        tokens.append(EOS)
        if overflow:
            raise PromptTooLongError(
                f"prompt exceeds {TOKEN_LIMIT} tokens; drop or shorten: {overflow}"
            )
        vectors = np.stack([_token_vector(t, self.dim) for t in tokens])
        vectors = vectors + _position_encoding(len(tokens), self.dim)
        emb = torch.from_numpy(vectors.astype(np.float32))[None]
        return PromptEncoding(emb, spans, tokens)
