"""Self-contained latent-diffusion-style backbone with hookable taps.

No pretrained checkpoint is downloadable in this environment, so the
"frozen model" is built in-process: a convolutional encoder compresses
images 8x into a 4-channel latent, and a small UNet with cross-attention
at the 32/16/8 levels predicts noise conditioned on the prompt
embeddings. Weights are a pure function of the model name (seeded
generator init), never of the run seed, mimicking a fixed pretrained
checkpoint; everything runs frozen under `torch.no_grad`.

Tap points are named `down32/down16/down8/mid8/up16/up32/up64` for
features and `attn_<level>` for pre-softmax cross-attention logits
(shape heads x positions x tokens). The default feature taps
(mid8, up16, up32) carry 512 + 320 + 192 = 1024 channels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import torch
from torch import nn

from .text import TextConditioner

LATENT_CHANNELS = 4
LATENT_FACTOR = 8  # image -> latent downsampling
TXT_DIM = 64
TIME_DIM = 128
WEIGHT_SEED = 0xC0FFEE  # fixed: weights mimic a pretrained checkpoint

# tap name -> (image-to-map divisor, channels)
FEATURE_TAPS = {
    "down32": (16, 96),
    "down16": (32, 160),
    "down8": (64, 256),
    "mid8": (64, 512),
    "up16": (32, 320),
    "up32": (16, 192),
    "up64": (8, 96),
}
ATTENTION_TAPS = {
    "attn_down32": 16,
    "attn_down16": 32,
    "attn_down8": 64,
    "attn_mid8": 64,
    "attn_up16": 32,
    "attn_up32": 16,
}
DEFAULT_FEATURE_TAPS = ("mid8", "up16", "up32")
DEFAULT_ATTENTION_TAPS = ("attn_down8", "attn_mid8", "attn_down16", "attn_up16")


@dataclass
class Recorder:
    """Collects tap outputs during one forward pass."""

    features: dict = field(default_factory=dict)
    attention: dict = field(default_factory=dict)


def _timestep_embedding(t: int, dim: int) -> torch.Tensor:
    half = dim // 2
    freqs = torch.exp(-math.log(10000.0) * torch.arange(half) / half)
    angles = t * freqs
    return torch.cat([torch.sin(angles), torch.cos(angles)])[None]


class ResBlock(nn.Module):
    def __init__(self, cin: int, cout: int):
        super().__init__()
        self.norm1 = nn.GroupNorm(8, cin)
        self.conv1 = nn.Conv2d(cin, cout, 3, padding=1)
        self.time = nn.Linear(TIME_DIM, cout)
        self.norm2 = nn.GroupNorm(8, cout)
        self.conv2 = nn.Conv2d(cout, cout, 3, padding=1)
        self.skip = nn.Conv2d(cin, cout, 1) if cin != cout else nn.Identity()

    def forward(self, x, t_emb):
        h = self.conv1(torch.nn.functional.silu(self.norm1(x)))
        h = h + self.time(t_emb)[:, :, None, None]
        h = self.conv2(torch.nn.functional.silu(self.norm2(h)))
        return h + self.skip(x)


class CrossAttention(nn.Module):
    """Multi-head attention from spatial positions to prompt tokens.

    The pre-softmax logit tensor (heads, positions, tokens) is what the
    extractor taps; softmax only feeds the value mixing inside the model.
    """

    def __init__(self, channels: int, heads: int = 2, head_dim: int = 32):
        super().__init__()
        inner = heads * head_dim
        self.heads = heads
        self.head_dim = head_dim
        self.to_q = nn.Linear(channels, inner, bias=False)
        self.to_k = nn.Linear(TXT_DIM, inner, bias=False)
        self.to_v = nn.Linear(TXT_DIM, inner, bias=False)
        self.to_out = nn.Linear(inner, channels)

    def forward(self, x, txt, recorder: Recorder | None = None, name: str = ""):
        b, c, h, w = x.shape
        q = self.to_q(x.flatten(2).transpose(1, 2))  # (b, hw, inner)
        k = self.to_k(txt)
        v = self.to_v(txt)

        def split(m):
            return m.view(b, -1, self.heads, self.head_dim).transpose(1, 2)

        logits = split(q) @ split(k).transpose(-2, -1) / math.sqrt(self.head_dim)
        if recorder is not None and name:
            recorder.attention[name] = logits[0].detach().clone()  # (heads, hw, T)
        out = torch.softmax(logits, dim=-1) @ split(v)
        out = out.transpose(1, 2).reshape(b, h * w, -1)
        return x + self.to_out(out).transpose(1, 2).view(b, c, h, w)


class _Down(nn.Module):
    def __init__(self, cin, cout):
        super().__init__()
        self.pool = nn.Conv2d(cin, cout, 3, stride=2, padding=1)
        self.block = ResBlock(cout, cout)

    def forward(self, x, t_emb):
        return self.block(self.pool(x), t_emb)


class _Up(nn.Module):
    def __init__(self, cin, cskip, cout):
        super().__init__()
        self.merge = nn.Conv2d(cin + cskip, cout, 3, padding=1)
        self.block = ResBlock(cout, cout)

    def forward(self, x, skip, t_emb):
        x = torch.nn.functional.interpolate(x, scale_factor=2, mode="nearest")
        return self.block(self.merge(torch.cat([x, skip], dim=1)), t_emb)


class LatentUNet(nn.Module):
    def __init__(self):
        super().__init__()
        self.time_mlp = nn.Sequential(
            nn.Linear(TIME_DIM, TIME_DIM), nn.SiLU(), nn.Linear(TIME_DIM, TIME_DIM)
        )
        self.stem = nn.Conv2d(LATENT_CHANNELS, 96, 3, padding=1)
        self.stem_block = ResBlock(96, 96)
        self.down1 = _Down(96, 96)
        self.attn_down32 = CrossAttention(96)
        self.down2 = _Down(96, 160)
        self.attn_down16 = CrossAttention(160)
        self.down3 = _Down(160, 256)
        self.attn_down8 = CrossAttention(256)
        self.mid1 = ResBlock(256, 512)
        self.attn_mid8 = CrossAttention(512)
        self.mid2 = ResBlock(512, 512)
        self.up1 = _Up(512, 160, 320)
        self.attn_up16 = CrossAttention(320)
        self.up2 = _Up(320, 96, 192)
        self.attn_up32 = CrossAttention(192)
        self.up3 = _Up(192, 96, 96)
        self.head = nn.Conv2d(96, LATENT_CHANNELS, 3, padding=1)

    def forward(self, z, t: int, txt, recorder: Recorder | None = None):
        def tap(name, tensor):
            if recorder is not None:
                recorder.features[name] = tensor[0].detach().clone()
            return tensor

        t_emb = self.time_mlp(_timestep_embedding(t, TIME_DIM).to(z.dtype))
        h64 = self.stem_block(self.stem(z), t_emb)
        d32 = self.attn_down32(self.down1(h64, t_emb), txt, recorder, "attn_down32")
        tap("down32", d32)
        d16 = self.attn_down16(self.down2(d32, t_emb), txt, recorder, "attn_down16")
        tap("down16", d16)
        d8 = self.attn_down8(self.down3(d16, t_emb), txt, recorder, "attn_down8")
        tap("down8", d8)
        m8 = self.mid1(d8, t_emb)
        m8 = self.attn_mid8(m8, txt, recorder, "attn_mid8")
        m8 = self.mid2(m8, t_emb)
        tap("mid8", m8)
        u16 = self.attn_up16(self.up1(m8, d16, t_emb), txt, recorder, "attn_up16")
        tap("up16", u16)
        u32 = self.attn_up32(self.up2(u16, d32, t_emb), txt, recorder, "attn_up32")
        tap("up32", u32)
        u64 = self.up3(u32, h64, t_emb)
        tap("up64", u64)
        return self.head(u64)


class ImageEncoder(nn.Module):
    """Convolutional stand-in for the VAE encoder: images -> 4ch latents."""

    def __init__(self):
        super().__init__()
        self.net = nn.Sequential(
            nn.Conv2d(3, 32, 3, stride=2, padding=1),
            nn.GroupNorm(8, 32),
            nn.SiLU(),
            nn.Conv2d(32, 64, 3, stride=2, padding=1),
            nn.GroupNorm(8, 64),
            nn.SiLU(),
            nn.Conv2d(64, 64, 3, stride=2, padding=1),
            nn.GroupNorm(8, 64),
            nn.SiLU(),
            nn.Conv2d(64, LATENT_CHANNELS, 3, padding=1),
        )

    def forward(self, images):
        return self.net(images)


class FrozenBackbone:
    """Encoder + UNet + conditioner + noising schedule, all frozen."""

    def __init__(self):
        self.encoder = ImageEncoder()
        self.unet = LatentUNet()
        self.conditioner = TextConditioner(TXT_DIM)
        betas = torch.linspace(1e-4, 0.02, 1000, dtype=torch.float64)
        self.alphas_cumprod = torch.cumprod(1.0 - betas, dim=0)
        self._init_weights()
        for module in (self.encoder, self.unet):
            module.eval()
            module.requires_grad_(False)

    def _init_weights(self):
        gen = torch.Generator().manual_seed(WEIGHT_SEED)
        for module in (self.encoder, self.unet):
            for name, p in sorted(module.named_parameters(), key=lambda kv: kv[0]):
                if p.ndim <= 1:
                    if name.endswith("weight"):
                        nn.init.ones_(p)  # norm scales
                    else:
                        nn.init.zeros_(p)
                else:
                    fan_in = p[0].numel()
                    with torch.no_grad():
                        p.normal_(0.0, 1.0 / math.sqrt(fan_in), generator=gen)

    def noisy_latent(self, z0: torch.Tensor, t: int, seed: int, no_noise: bool):
        """Forward-noise a clean latent to timestep t with a seeded draw."""
        if not 1 <= t <= 1000:
            raise ValueError(f"timestep must lie in [1, 1000], got {t}")
        if no_noise:
            return z0
        gen = torch.Generator().manual_seed(seed)
        eps = torch.randn(z0.shape, generator=gen, dtype=z0.dtype)
        abar = self.alphas_cumprod[t - 1].to(z0.dtype)
        return torch.sqrt(abar) * z0 + torch.sqrt(1.0 - abar) * eps

    def run(self, images: torch.Tensor, t: int, txt: torch.Tensor,
            noise_seed: int, no_noise: bool) -> Recorder:
        """One frozen forward pass; returns the recorded taps."""
        recorder = Recorder()
        with torch.no_grad():
            z0 = self.encoder(images)
            zt = self.noisy_latent(z0, t, noise_seed, no_noise)
            self.unet(zt, t, txt, recorder)
        return recorder
