"""Channel cross-attention conditioning block.

Two branches merge a condition vector into a feature map: an additive
branch broadcasts a projection of the condition over space, and a gating
branch weighs channels by attention between the map's pooled descriptor and
the condition. The additive projection and the gate's output projection
start at zero and the fuse conv starts as the identity, so a fresh block is
an exact passthrough: it can be inserted into a trained network without
changing a single output until training moves it.
"""

from __future__ import annotations

import math

import torch
from torch import nn

from .embeddings import TransferError


class CCAM(nn.Module):
    def __init__(self, channels: int, e_dim: int):
        super().__init__()
        self.channels = channels
        self.e_dim = e_dim
        self.add_proj = nn.Linear(e_dim, channels)
        nn.init.zeros_(self.add_proj.weight)
        nn.init.zeros_(self.add_proj.bias)
        self.key = nn.Linear(e_dim, channels)
        self.value = nn.Linear(e_dim, channels)
        self.gate = nn.Linear(channels, channels)
        nn.init.zeros_(self.gate.weight)
        nn.init.zeros_(self.gate.bias)
        self.fuse = nn.Conv2d(channels, channels, 3, padding=1)
        nn.init.dirac_(self.fuse.weight)
        nn.init.zeros_(self.fuse.bias)

    def forward(self, f: torch.Tensor, e: torch.Tensor) -> torch.Tensor:
        if f.dim() != 4 or f.shape[1] != self.channels:
            raise TransferError(f"expected (B, {self.channels}, H, W), got {tuple(f.shape)}")
        if e.dim() == 1:
            e = e[None].expand(f.shape[0], -1)
        if e.shape != (f.shape[0], self.e_dim):
            raise TransferError(
                f"condition shaped {tuple(e.shape)} not projectable: need (B, {self.e_dim})"
            )
        d = f.mean(dim=(2, 3))
        attended = torch.sigmoid(d * self.key(e) / math.sqrt(self.channels)) * self.value(e)
        w = self.gate(attended)
        add = self.add_proj(e)
        return self.fuse(f + add[:, :, None, None] + f * w[:, :, None, None])
