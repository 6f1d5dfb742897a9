"""Pluggable vision encoder for retrieval embeddings.

The toy stand-in is a small frozen ViT: 16x16 patches of a 64x64 input,
two self-attention layers, mean pooling, and an optional linear head (off
by default so the pooled feature is the embedding). Any module mapping an
image batch to (B, D) with an ``encoder_id`` and ``dim`` can replace it.
"""

from __future__ import annotations

import math

import torch
from torch import nn
from torch.nn import functional as F

from .index import EmbeddingVector, RecommendError


class _Attention(nn.Module):
    def __init__(self, dim: int):
        super().__init__()
        self.qkv = nn.Linear(dim, dim * 3)
        self.out = nn.Linear(dim, dim)
        self.norm = nn.LayerNorm(dim)
        self.mlp = nn.Sequential(nn.Linear(dim, dim * 2), nn.GELU(), nn.Linear(dim * 2, dim))
        self.norm2 = nn.LayerNorm(dim)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        q, k, v = self.qkv(self.norm(x)).chunk(3, dim=-1)
        attn = torch.softmax(q @ k.transpose(-1, -2) / math.sqrt(x.shape[-1]), dim=-1)
        x = x + self.out(attn @ v)
        return x + self.mlp(self.norm2(x))


class ToyVisionEncoder(nn.Module):
    def __init__(self, dim: int = 64, image_size: int = 64, patch: int = 16,
                 layers: int = 2, seed: int = 11, head_dim: int | None = None):
        super().__init__()
        torch.manual_seed(seed)
        self.image_size = image_size
        self.dim = head_dim if head_dim is not None else dim
        self.encoder_id = f"toy-vit-d{self.dim}-s{seed}"
        self.patch_embed = nn.Conv2d(3, dim, patch, stride=patch)
        n_tokens = (image_size // patch) ** 2
        self.pos = nn.Parameter(torch.randn(1, n_tokens, dim) * 0.02)
        self.blocks = nn.ModuleList(_Attention(dim) for _ in range(layers))
        self.head = nn.Linear(dim, head_dim) if head_dim is not None else nn.Identity()
        self.requires_grad_(False)
        self.eval()

    @torch.no_grad()
    def forward(self, image: torch.Tensor) -> torch.Tensor:
        if image.dim() == 3:
            image = image[None]
        if image.shape[1] == 1:
            image = image.expand(-1, 3, -1, -1)
        if image.shape[1] != 3:
            raise RecommendError(f"expected 1- or 3-channel images, got {image.shape[1]}")
        if image.shape[-2:] != (self.image_size, self.image_size):
            image = F.interpolate(image, size=(self.image_size, self.image_size),
                                  mode="bilinear", align_corners=False)
        x = self.patch_embed(image).flatten(2).transpose(1, 2) + self.pos
        for block in self.blocks:
            x = block(x)
        return self.head(x.mean(dim=1))


def embed(image: torch.Tensor, encoder) -> EmbeddingVector:
    """Embed one image (or sketch) with any pluggable vision encoder."""
    if encoder is None:
        raise RecommendError("no vision encoder installed")
    v = encoder(image)
    if v.dim() == 2:
        if v.shape[0] != 1:
            raise RecommendError("embed() takes a single image; use the encoder for batches")
        v = v[0]
    return EmbeddingVector(v=v.detach().clone(), encoder_id=encoder.encoder_id)
