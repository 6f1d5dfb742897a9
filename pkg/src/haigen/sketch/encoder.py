"""Frozen multi-level feature backbone for sketch work.

VGG-16-shaped: four conv blocks tapped before each max-pool, so the taps sit
at full, 1/2, 1/4, and 1/8 resolution, plus a pooled fifth block reduced to
a flat semantic vector. Weights are frozen at construction; pretrained
weights can be loaded through the usual state-dict route, and tests run the
fixed-seed random instance.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import nn
from torch.nn import functional as F


class SketchError(ValueError):
    pass


@dataclass(frozen=True)
class EncoderConfig:
    channels: tuple[int, int, int, int] = (16, 32, 64, 128)
    convs_per_block: tuple[int, int, int, int] = (2, 2, 3, 3)
    semantic_dim: int = 128
    seed: int = 0


@dataclass
class MultiLevelFeatures:
    """Taps f_e1..f_e4 (maps, halving resolution) and f_e5 (flat vector)."""

    f_e1: torch.Tensor
    f_e2: torch.Tensor
    f_e3: torch.Tensor
    f_e4: torch.Tensor
    f_e5: torch.Tensor

    def __post_init__(self) -> None:
        maps = self.levels()
        for n, f in enumerate(maps, start=1):
            if f.dim() != 4:
                raise SketchError(f"f_e{n} must be a 4d feature map")
        for a, b in zip(maps, maps[1:]):
            if (a.shape[2] != 2 * b.shape[2]) or (a.shape[3] != 2 * b.shape[3]):
                raise SketchError("spatial sizes must halve per level")
        if self.f_e5.dim() != 2:
            raise SketchError("f_e5 must be a flat (B, D) vector")

    def levels(self) -> list[torch.Tensor]:
        return [self.f_e1, self.f_e2, self.f_e3, self.f_e4]

    def level(self, n: int) -> torch.Tensor:
        if not 1 <= n <= 4:
            raise SketchError(f"level {n} outside 1..4")
        return self.levels()[n - 1]


def _vgg_block(in_ch: int, out_ch: int, convs: int) -> nn.Sequential:
    layers: list[nn.Module] = []
    for i in range(convs):
        layers.append(nn.Conv2d(in_ch if i == 0 else out_ch, out_ch, 3, padding=1))
        layers.append(nn.ReLU())
    return nn.Sequential(*layers)


class SketchEncoder(nn.Module):
    """Four tapped conv blocks plus a pooled semantic head; always frozen."""

    def __init__(self, cfg: EncoderConfig | None = None):
        super().__init__()
        self.cfg = cfg = cfg or EncoderConfig()
        torch.manual_seed(cfg.seed)
        chans = cfg.channels
        self.blocks = nn.ModuleList(
            _vgg_block(3 if i == 0 else chans[i - 1], chans[i], cfg.convs_per_block[i])
            for i in range(4)
        )
        self.block5 = _vgg_block(chans[3], chans[3], 3)
        self.semantic = nn.Linear(chans[3], cfg.semantic_dim)
        self.requires_grad_(False)
        self.eval()

    @property
    def level_channels(self) -> tuple[int, int, int, int]:
        return self.cfg.channels

    @property
    def semantic_dim(self) -> int:
        return self.cfg.semantic_dim

    def forward(self, image: torch.Tensor) -> MultiLevelFeatures:
        if image.dim() == 3:
            image = image[None]
        if image.dim() != 4 or image.shape[1] != 3:
            raise SketchError(f"expected a 3-channel image batch, got {tuple(image.shape)}")
        taps = []
        h = image
        for block in self.blocks:
            h = block(h)
            taps.append(h)
            h = F.max_pool2d(h, 2)
        h = self.block5(h)
        f_e5 = self.semantic(h.mean(dim=(2, 3)))
        return MultiLevelFeatures(*taps, f_e5)


def as_rgb(x: torch.Tensor) -> torch.Tensor:
    """Promote 1-channel sketches to 3 channels for the backbone."""
    if x.dim() == 3:
        x = x[None]
    if x.shape[1] == 1:
        return x.expand(-1, 3, -1, -1)
    return x


def extract_features(image: torch.Tensor, encoder: SketchEncoder) -> MultiLevelFeatures:
    """Run the frozen backbone on a 3-channel image batch."""
    return encoder(image)
