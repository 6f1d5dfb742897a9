"""Designer-style sketch generator: frozen encoder, APSN, DSMFF decoder.

Encoder taps are style-normalized with the designer's statistics, projected
to a uniform decoder width, then fused coarse-to-fine: the deepest tap seeds
the decoder and each DSMFF block doubles the resolution until the output
head emits a 1-channel sketch at input resolution.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import torch
from torch import nn

from .apsn import DesignerStyleStats, apsn
from .blocks import DSMFF
from .encoder import EncoderConfig, SketchEncoder, SketchError


@dataclass(frozen=True)
class SketchGeneratorConfig:
    decoder_width: int = 64
    leaky_slope: float = 0.2
    gamma_init: float = 1.0
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    seed: int = 0


@dataclass
class DecoderState:
    """Instrumented trace of one decoder pass: f_d per level plus gates."""

    f_d: dict[int, torch.Tensor]  # level -> decoder feature (3 = seed, 0 = head input)
    gamma: dict[int, float]
    output: torch.Tensor


class SketchGenerator(nn.Module):
    def __init__(self, cfg: SketchGeneratorConfig | None = None,
                 encoder: SketchEncoder | None = None):
        super().__init__()
        self.cfg = cfg = cfg or SketchGeneratorConfig()
        self.encoder = encoder if encoder is not None else SketchEncoder(cfg.encoder)
        torch.manual_seed(cfg.seed)
        C = cfg.decoder_width
        chans = self.encoder.level_channels
        # 1x1 harmonization of each tap to the decoder width
        self.proj = nn.ModuleList(nn.Conv2d(ch, C, 1) for ch in chans)
        self.blocks = nn.ModuleDict(
            {str(n): DSMFF(C, cfg.leaky_slope, cfg.gamma_init) for n in (3, 2, 1)}
        )
        self.head = nn.Conv2d(C, 1, 3, padding=1)

    def trainable_parameters(self) -> list[nn.Parameter]:
        return [p for p in self.parameters() if p.requires_grad]

    def forward(
        self,
        image: torch.Tensor,
        stats: DesignerStyleStats,
        return_state: bool = False,
    ) -> torch.Tensor | DecoderState:
        if stats is None:
            raise SketchError("designer style stats are required")
        if image.dim() == 3:
            image = image[None]
        feats = self.encoder(image)
        normed = [
            self.proj[n - 1](apsn(feats.level(n), *stats.level(n))) for n in range(1, 5)
        ]
        f_d = normed[3]  # decoder seed at 1/8 resolution
        trace: dict[int, torch.Tensor] = {3: f_d}
        for n in (3, 2, 1):
            f_d = self.blocks[str(n)](normed[n - 1], f_d)
            trace[n - 1] = f_d
        out = torch.sigmoid(self.head(f_d))
        if return_state:
            gammas = {n: float(self.blocks[str(n)].gamma) for n in (3, 2, 1)}
            return DecoderState(f_d=trace, gamma=gammas, output=out)
        return out


def generate_sketch(
    image: torch.Tensor, stats: DesignerStyleStats, model: SketchGenerator
) -> torch.Tensor:
    """Deterministic eval-mode sketch: (B, 1, H, W) in [0, 1] at input size."""
    was_training = model.training
    model.eval()
    try:
        with torch.no_grad():
            out = model(image, stats)
    finally:
        model.train(was_training)
    return out
