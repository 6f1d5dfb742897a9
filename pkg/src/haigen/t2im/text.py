"""Pluggable text conditioning with a deterministic toy encoder.

The toy encoder stands in for a pretrained CLIP-style text model: a
hash-bucket tokenizer feeding a small frozen 2-layer self-attention stack.
Any object with ``encode(prompt) -> TextEmbedding`` and an ``encoder_id``
can be dropped in instead.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

import torch
from torch import nn

MAX_PROMPT_BYTES = 1024


class TextError(ValueError):
    pass


@dataclass
class TextEmbedding:
    """Sequence of token vectors produced by a text encoder."""

    p: torch.Tensor  # (L, D)
    source: str

    def __post_init__(self) -> None:
        if self.p.dim() != 2 or self.p.shape[0] < 1:
            raise TextError(f"embedding must be LxD with L >= 1, got {tuple(self.p.shape)}")
        if not torch.isfinite(self.p).all():
            raise TextError("embedding contains non-finite values")


def hash_tokenize(prompt: str, vocab_size: int, max_len: int) -> list[int]:
    """Stable whitespace tokenizer: sha256 of each lowercased word mod vocab."""
    words = prompt.lower().split()
    ids = [
        int.from_bytes(hashlib.sha256(w.encode("utf-8")).digest()[:8], "little") % vocab_size
        for w in words[:max_len]
    ]
    return ids


class _SelfAttentionBlock(nn.Module):
    def __init__(self, dim: int):
        super().__init__()
        self.q = nn.Linear(dim, dim, bias=False)
        self.k = nn.Linear(dim, dim, bias=False)
        self.v = nn.Linear(dim, dim, bias=False)
        self.out = nn.Linear(dim, dim)
        self.norm = nn.LayerNorm(dim)
        self.mlp = nn.Sequential(nn.Linear(dim, dim * 2), nn.GELU(), nn.Linear(dim * 2, dim))
        self.norm2 = nn.LayerNorm(dim)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        h = self.norm(x)
        q, k, v = self.q(h), self.k(h), self.v(h)
        attn = torch.softmax(q @ k.transpose(-1, -2) / math.sqrt(x.shape[-1]), dim=-1)
        x = x + self.out(attn @ v)
        return x + self.mlp(self.norm2(x))


class ToyTextEncoder(nn.Module):
    """Frozen hash-bucket tokenizer + 2-layer self-attention encoder."""

    def __init__(self, dim: int = 32, vocab_size: int = 2048, max_len: int = 77,
                 layers: int = 2, seed: int = 7):
        super().__init__()
        torch.manual_seed(seed)
        self.dim = dim
        self.vocab_size = vocab_size
        self.max_len = max_len
        self.encoder_id = f"toy-text-v1-d{dim}-s{seed}"
        self.token_emb = nn.Embedding(vocab_size, dim)
        self.pos_emb = nn.Parameter(torch.randn(max_len, dim) * 0.02)
        self.blocks = nn.ModuleList(_SelfAttentionBlock(dim) for _ in range(layers))
        self.requires_grad_(False)
        self.eval()

    @torch.no_grad()
    def encode(self, prompt: str) -> TextEmbedding:
        if not prompt or not prompt.strip():
            raise TextError("prompt must be non-empty")
        if len(prompt.encode("utf-8")) > MAX_PROMPT_BYTES:
            raise TextError(f"prompt exceeds {MAX_PROMPT_BYTES} bytes")
        ids = hash_tokenize(prompt, self.vocab_size, self.max_len)
        if not ids:
            raise TextError("prompt has no tokens")
        tok = torch.tensor(ids, dtype=torch.long)
        x = self.token_emb(tok) + self.pos_emb[: len(ids)]
        for block in self.blocks:
            x = block(x)
        return TextEmbedding(p=x, source=self.encoder_id)

    @torch.no_grad()
    def encode_batch(self, prompts: list[str]) -> torch.Tensor:
        """Stack prompt embeddings into (B, L_max, D), zero-padded."""
        embs = [self.encode(p).p for p in prompts]
        L = max(e.shape[0] for e in embs)
        out = torch.zeros(len(embs), L, self.dim)
        for i, e in enumerate(embs):
            out[i, : e.shape[0]] = e
        return out


def encode_text(prompt: str, encoder) -> TextEmbedding:
    """Encode a prompt with any pluggable text encoder."""
    if encoder is None:
        raise TextError("no text encoder installed")
    return encoder.encode(prompt)
