"""Pixel-space denoiser for sketch coloring.

The sketch rides along as extra input channels (the explicit condition);
timestep and reference-style embeddings enter only through CCAM blocks at
the configured low-resolution levels (the implicit conditions). Base layers
are built before any CCAM so two configs differing only in CCAM placement
share identical base weights under the same seed.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import nn
from torch.nn import functional as F

from .ccam import CCAM
from .embeddings import TimestepEmbedding, TransferError


@dataclass(frozen=True)
class STMConfig:
    image_channels: int = 3
    sketch_channels: int = 1
    base_channels: int = 16
    channel_mults: tuple[int, ...] = (1, 2, 4)
    # levels carrying CCAM pairs; the mid block always carries one
    ccam_levels: tuple[int, ...] = (1, 2)
    ccam_order: tuple[str, ...] = ("time", "style")
    time_dim: int = 64
    style_dim: int = 128
    norm_groups: int = 8
    seed: int = 0

    def __post_init__(self) -> None:
        for lvl in self.ccam_levels:
            if not 0 <= lvl < len(self.channel_mults):
                raise ValueError(f"ccam level {lvl} out of range")
        if sorted(self.ccam_order) != ["style", "time"]:
            raise ValueError("ccam_order must arrange 'time' and 'style'")

    @property
    def level_channels(self) -> tuple[int, ...]:
        return tuple(self.base_channels * m for m in self.channel_mults)


class _Res(nn.Module):
    def __init__(self, in_ch: int, out_ch: int, groups: int):
        super().__init__()
        self.norm1 = nn.GroupNorm(min(groups, in_ch), in_ch)
        self.conv1 = nn.Conv2d(in_ch, out_ch, 3, padding=1)
        self.norm2 = nn.GroupNorm(min(groups, out_ch), out_ch)
        self.conv2 = nn.Conv2d(out_ch, out_ch, 3, padding=1)
        self.skip = nn.Conv2d(in_ch, out_ch, 1) if in_ch != out_ch else nn.Identity()

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        h = self.conv1(F.silu(self.norm1(x)))
        h = self.conv2(F.silu(self.norm2(h)))
        return h + self.skip(x)


class STMDenoiser(nn.Module):
    version = "stm-v1"

    def __init__(self, cfg: STMConfig | None = None):
        super().__init__()
        self.cfg = cfg = cfg or STMConfig()
        torch.manual_seed(cfg.seed)
        chans = cfg.level_channels
        g = cfg.norm_groups
        self.conv_in = nn.Conv2d(cfg.image_channels + cfg.sketch_channels, chans[0], 3, padding=1)
        self.enc = nn.ModuleList()
        self.downs = nn.ModuleList()
        prev = chans[0]
        for i, ch in enumerate(chans):
            self.enc.append(_Res(prev, ch, g))
            self.downs.append(
                nn.Conv2d(ch, ch, 3, stride=2, padding=1) if i < len(chans) - 1 else nn.Identity()
            )
            prev = ch
        self.mid1 = _Res(chans[-1], chans[-1], g)
        self.mid2 = _Res(chans[-1], chans[-1], g)
        self.dec = nn.ModuleList()
        self.ups = nn.ModuleList()
        for i in reversed(range(len(chans))):
            above = chans[i + 1] if i + 1 < len(chans) else chans[-1]
            self.ups.append(
                nn.ConvTranspose2d(above, chans[i], 2, stride=2)
                if i + 1 < len(chans) else nn.Identity()
            )
            self.dec.append(_Res(chans[i] * 2 if i + 1 < len(chans) else chans[-1] * 2,
                                 chans[i], g))
        self.out_norm = nn.GroupNorm(min(g, chans[0]), chans[0])
        self.out_conv = nn.Conv2d(chans[0], cfg.image_channels, 3, padding=1)
        self.time_embed = TimestepEmbedding(cfg.time_dim, seed=cfg.seed)
        # CCAM sites are built after every base layer so that configs with and
        # without CCAM share base weights for a given seed
        dims = {"time": cfg.time_dim, "style": cfg.style_dim}
        self.ccams = nn.ModuleDict()
        for i in cfg.ccam_levels:
            for side in ("enc", "dec"):
                self.ccams[f"{side}{i}"] = nn.ModuleDict(
                    {kind: CCAM(chans[i], dims[kind]) for kind in cfg.ccam_order}
                )
        self.ccams["mid"] = nn.ModuleDict(
            {kind: CCAM(chans[-1], dims[kind]) for kind in cfg.ccam_order}
        )

    def _condition(self, site: str, h: torch.Tensor, embs: dict[str, torch.Tensor]) -> torch.Tensor:
        if site not in self.ccams:
            return h
        for kind in self.cfg.ccam_order:
            h = self.ccams[site][kind](h, embs[kind])
        return h

    def forward(
        self,
        x_t: torch.Tensor,
        t: int | torch.Tensor,
        sketch: torch.Tensor,
        style: torch.Tensor,
    ) -> torch.Tensor:
        if x_t.dim() != 4 or x_t.shape[1] != self.cfg.image_channels:
            raise TransferError(f"expected (B, {self.cfg.image_channels}, H, W) noise image")
        if sketch.dim() == 3:
            sketch = sketch[None]
        if sketch.shape[0] == 1 and x_t.shape[0] > 1:
            sketch = sketch.expand(x_t.shape[0], -1, -1, -1)
        if sketch.shape[-2:] != x_t.shape[-2:] or sketch.shape[1] != self.cfg.sketch_channels:
            raise TransferError(
                f"sketch {tuple(sketch.shape)} does not match noise image "
                f"{tuple(x_t.shape)}; resample the sketch first"
            )
        if not torch.is_tensor(t):
            t = torch.full((x_t.shape[0],), int(t), dtype=torch.long)
        elif t.dim() == 0:
            t = t.expand(x_t.shape[0])
        if style.dim() == 1:
            style = style[None].expand(x_t.shape[0], -1)
        embs = {"time": self.time_embed(t), "style": style}
        h = self.conv_in(torch.cat([x_t, sketch], dim=1))
        skips = []
        for i, (res, down) in enumerate(zip(self.enc, self.downs)):
            h = self._condition(f"enc{i}", res(h), embs)
            skips.append(h)
            h = down(h)
        h = self.mid2(self._condition("mid", self.mid1(h), embs))
        levels = list(reversed(range(len(self.enc))))
        for i, up, res, skip in zip(levels, self.ups, self.dec, reversed(skips)):
            h = self._condition(f"dec{i}", res(torch.cat([up(h), skip], dim=1)), embs)
        return self.out_conv(F.silu(self.out_norm(h)))
