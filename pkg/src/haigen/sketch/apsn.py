"""Adaptive personalized style normalization and designer statistics.

A feature map is whitened per sample and per channel over its spatial
extent, then rescaled to a designer's per-channel statistics collected over
a sketch corpus. Population (biased) standard deviations are used on both
sides so duplicating the corpus leaves the statistics unchanged.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass

import numpy as np
import torch

from .encoder import SketchEncoder, SketchError, as_rgb

APSN_EPS = 1e-6


def apsn(
    x: torch.Tensor, mu_s: torch.Tensor, sigma_s: torch.Tensor, eps: float = APSN_EPS
) -> torch.Tensor:
    """sigma_s * (x - mu(x)) / (sigma(x) + eps) + mu_s, statistics per sample
    and channel over the spatial dimensions."""
    if x.dim() != 4:
        raise SketchError("apsn expects (B, C, H, W)")
    C = x.shape[1]
    if mu_s.shape != (C,) or sigma_s.shape != (C,):
        raise SketchError(
            f"stats sized {tuple(mu_s.shape)}/{tuple(sigma_s.shape)} do not match {C} channels"
        )
    mu = x.mean(dim=(2, 3), keepdim=True)
    sigma = x.std(dim=(2, 3), keepdim=True, unbiased=False)
    out = sigma_s[None, :, None, None] * (x - mu) / (sigma + eps) + mu_s[None, :, None, None]
    return out


@dataclass
class DesignerStyleStats:
    """Per-level, per-channel corpus statistics for one designer."""

    designer_id: str
    corpus_size: int
    mu_s: tuple[torch.Tensor, ...]  # levels 1..4, each (C_n,)
    sigma_s: tuple[torch.Tensor, ...]

    def __post_init__(self) -> None:
        if len(self.mu_s) != 4 or len(self.sigma_s) != 4:
            raise SketchError("stats must cover levels 1..4")
        for n, (m, s) in enumerate(zip(self.mu_s, self.sigma_s), start=1):
            if m.shape != s.shape or m.dim() != 1:
                raise SketchError(f"level {n} stats must be matching vectors")
            if (s < 0).any():
                raise SketchError(f"level {n} sigma_s has negative entries")
        if self.corpus_size < 1:
            raise SketchError("corpus_size must be >= 1")

    def level(self, n: int) -> tuple[torch.Tensor, torch.Tensor]:
        if not 1 <= n <= 4:
            raise SketchError(f"level {n} outside 1..4")
        return self.mu_s[n - 1], self.sigma_s[n - 1]


def compute_style_stats(
    corpus: torch.Tensor | list[torch.Tensor],
    encoder: SketchEncoder,
    designer_id: str = "designer",
    batch_size: int = 8,
) -> DesignerStyleStats:
    """Mean and population std over batch x H x W of the whole corpus,
    accumulated in float64 so batching order cannot change the result."""
    if isinstance(corpus, torch.Tensor):
        sketches = corpus if corpus.dim() == 4 else corpus[None]
    else:
        sketches = torch.stack([s if s.dim() == 3 else s[0] for s in corpus])
    if sketches.shape[0] == 0:
        raise SketchError("corpus is empty")
    sums: list[torch.Tensor | None] = [None] * 4
    sqs: list[torch.Tensor | None] = [None] * 4
    counts = [0] * 4
    with torch.no_grad():
        for start in range(0, sketches.shape[0], batch_size):
            feats = encoder(as_rgb(sketches[start : start + batch_size]))
            for i, f in enumerate(feats.levels()):
                f64 = f.double()
                s1 = f64.sum(dim=(0, 2, 3))
                s2 = (f64 * f64).sum(dim=(0, 2, 3))
                sums[i] = s1 if sums[i] is None else sums[i] + s1
                sqs[i] = s2 if sqs[i] is None else sqs[i] + s2
                counts[i] += f.shape[0] * f.shape[2] * f.shape[3]
    mu, sigma = [], []
    for s1, s2, n in zip(sums, sqs, counts):
        m = s1 / n
        var = (s2 / n - m * m).clamp_min(0.0)
        mu.append(m.float())
        sigma.append(var.sqrt().float())
    return DesignerStyleStats(
        designer_id=designer_id, corpus_size=int(sketches.shape[0]),
        mu_s=tuple(mu), sigma_s=tuple(sigma),
    )


def save_style_stats(path, stats: DesignerStyleStats | list[DesignerStyleStats]) -> None:
    """Binary stats file holding one or more designers, keyed by designer_id."""
    items = stats if isinstance(stats, list) else [stats]
    arrays: dict[str, np.ndarray] = {}
    manifest = {}
    for st in items:
        manifest[st.designer_id] = {"corpus_size": st.corpus_size}
        for n in range(1, 5):
            arrays[f"{st.designer_id}/mu{n}"] = st.mu_s[n - 1].numpy()
            arrays[f"{st.designer_id}/sigma{n}"] = st.sigma_s[n - 1].numpy()
    buf = io.BytesIO()
    np.savez(
        buf,
        manifest=np.frombuffer(json.dumps(manifest).encode("utf-8"), dtype=np.uint8),
        **arrays,
    )
    with open(path, "wb") as fh:
        fh.write(buf.getvalue())


def load_style_stats(path) -> dict[str, DesignerStyleStats]:
    with open(path, "rb") as fh:
        blob = np.load(io.BytesIO(fh.read()))
    manifest = json.loads(bytes(blob["manifest"]).decode("utf-8"))
    out = {}
    for designer_id, meta in manifest.items():
        mu = tuple(torch.from_numpy(blob[f"{designer_id}/mu{n}"]) for n in range(1, 5))
        sigma = tuple(torch.from_numpy(blob[f"{designer_id}/sigma{n}"]) for n in range(1, 5))
        out[designer_id] = DesignerStyleStats(
            designer_id=designer_id, corpus_size=int(meta["corpus_size"]),
            mu_s=mu, sigma_s=sigma,
        )
    return out
