"""Condition embeddings for style transfer: timestep and reference style.

Timesteps pass through sinusoidal features and two linear layers; raw
integers through two linear layers alone could not stay injective across a
schedule, the sinusoidal base is the minimal fix. The style encoder is a
small residual CNN with global pooling and a linear head, trained jointly
with the denoiser.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import nn
from torch.nn import functional as F

from ..t2im.unet import sinusoidal_time_embedding


class TransferError(ValueError):
    pass


@dataclass
class TimeEmbedding:
    e_t: torch.Tensor  # (D,)

    def __post_init__(self) -> None:
        if self.e_t.dim() != 1 or not torch.isfinite(self.e_t).all():
            raise TransferError("time embedding must be a finite flat vector")


@dataclass
class StyleEmbedding:
    s: torch.Tensor  # (D_s,)

    def __post_init__(self) -> None:
        if self.s.dim() != 1 or not torch.isfinite(self.s).all():
            raise TransferError("style embedding must be a finite flat vector")


class TimestepEmbedding(nn.Module):
    """Sinusoidal features of t followed by two linear layers."""

    def __init__(self, dim: int = 64, seed: int = 0):
        super().__init__()
        torch.manual_seed(seed)
        self.dim = dim
        self.lin1 = nn.Linear(dim, dim)
        self.lin2 = nn.Linear(dim, dim)

    def forward(self, t: torch.Tensor) -> torch.Tensor:
        return self.lin2(F.silu(self.lin1(sinusoidal_time_embedding(t, self.dim))))


def time_embed(t: int, T: int, module: TimestepEmbedding) -> TimeEmbedding:
    """Embed one step index, range-checked against the schedule length."""
    if not 1 <= t <= T:
        raise TransferError(f"t={t} outside 1..{T}")
    with torch.no_grad():
        e = module(torch.tensor([t], dtype=torch.long))[0]
    return TimeEmbedding(e_t=e)


class _ResDown(nn.Module):
    def __init__(self, in_ch: int, out_ch: int, groups: int = 8):
        super().__init__()
        self.norm1 = nn.GroupNorm(min(groups, in_ch), in_ch)
        self.conv1 = nn.Conv2d(in_ch, out_ch, 3, stride=2, padding=1)
        self.norm2 = nn.GroupNorm(min(groups, out_ch), out_ch)
        self.conv2 = nn.Conv2d(out_ch, out_ch, 3, padding=1)
        self.skip = nn.Conv2d(in_ch, out_ch, 1, stride=2)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        h = self.conv1(F.silu(self.norm1(x)))
        h = self.conv2(F.silu(self.norm2(h)))
        return h + self.skip(x)


class StyleEncoder(nn.Module):
    """4 residual downsampling blocks, global pool, linear head to D_s."""

    def __init__(self, style_dim: int = 128, base: int = 16, seed: int = 0):
        super().__init__()
        torch.manual_seed(seed)
        self.style_dim = style_dim
        chans = [base, base * 2, base * 4, base * 4]
        self.stem = nn.Conv2d(3, base, 3, padding=1)
        blocks = []
        prev = base
        for ch in chans:
            blocks.append(_ResDown(prev, ch))
            prev = ch
        self.blocks = nn.Sequential(*blocks)
        self.head = nn.Linear(prev, style_dim)

    def forward(self, image: torch.Tensor) -> torch.Tensor:
        if image.dim() == 3:
            image = image[None]
        if image.shape[1] != 3:
            raise TransferError(f"style encoder expects 3-channel images, got {image.shape[1]}")
        h = self.blocks(self.stem(image))
        return self.head(h.mean(dim=(2, 3)))


def style_encode(reference_image: torch.Tensor, encoder: StyleEncoder) -> StyleEmbedding:
    with torch.no_grad():
        s = encoder(reference_image)
    return StyleEmbedding(s=s[0] if s.dim() == 2 else s)
