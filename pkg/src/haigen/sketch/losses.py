"""Four-term sketch training objective and the patch discriminator.

total = 100 * L_gram + 1 * L_g + 0.5 * L_cos + 100 * L_clip

L_gram compares Gram matrices of the backbone taps, L_g is a non-saturating
adversarial term against a 4-layer patch discriminator, L_cos is the cosine
distance of the global semantic vectors, and L_clip is the mean-squared
distance between global embeddings from a pluggable encoder (the backbone's
semantic vector when none is installed).
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import nn
from torch.nn import functional as F

from .encoder import SketchEncoder, SketchError, as_rgb


@dataclass(frozen=True)
class LossWeights:
    gram: float = 100.0
    g: float = 1.0
    cos: float = 0.5
    clip: float = 100.0


def gram_matrix(f: torch.Tensor) -> torch.Tensor:
    """Per-sample channel co-activation matrix, normalized by C*H*W."""
    if f.dim() != 4:
        raise SketchError("gram_matrix expects (B, C, H, W)")
    B, C, H, W = f.shape
    flat = f.reshape(B, C, H * W)
    return flat @ flat.transpose(1, 2) / (C * H * W)


class PatchDiscriminator(nn.Module):
    """4-layer patch critic over 1-channel sketches; outputs logits."""

    def __init__(self, base: int = 16, slope: float = 0.2):
        super().__init__()
        self.net = nn.Sequential(
            nn.Conv2d(1, base, 4, stride=2, padding=1),
            nn.LeakyReLU(slope),
            nn.Conv2d(base, base * 2, 4, stride=2, padding=1),
            nn.BatchNorm2d(base * 2),
            nn.LeakyReLU(slope),
            nn.Conv2d(base * 2, base * 4, 4, stride=1, padding=1),
            nn.BatchNorm2d(base * 4),
            nn.LeakyReLU(slope),
            nn.Conv2d(base * 4, 1, 4, stride=1, padding=1),
        )

    def forward(self, sketch: torch.Tensor) -> torch.Tensor:
        if sketch.dim() != 4 or sketch.shape[1] != 1:
            raise SketchError("discriminator expects (B, 1, H, W) sketches")
        return self.net(sketch)


def discriminator_loss(
    discriminator: PatchDiscriminator, real: torch.Tensor, fake: torch.Tensor
) -> torch.Tensor:
    """Binary cross-entropy critic objective; fake detached by the caller."""
    d_real = discriminator(real)
    d_fake = discriminator(fake)
    return (
        F.binary_cross_entropy_with_logits(d_real, torch.ones_like(d_real))
        + F.binary_cross_entropy_with_logits(d_fake, torch.zeros_like(d_fake))
    )


def i2s_total(components: dict[str, float], weights: LossWeights = LossWeights()) -> float:
    """Exact weighted-sum bookkeeping over separately computed components.

    Operation order matches i2s_loss, so on float64 component values the two
    agree to the last bit.
    """
    return float(
        weights.gram * float(components["gram"])
        + weights.g * float(components["g"])
        + weights.cos * float(components["cos"])
        + weights.clip * float(components["clip"])
    )


def i2s_loss(
    generated: torch.Tensor,
    reference: torch.Tensor,
    features: SketchEncoder,
    discriminator: PatchDiscriminator,
    global_encoder=None,
    weights: LossWeights = LossWeights(),
) -> tuple[torch.Tensor, dict[str, torch.Tensor]]:
    """(total, components) for a generated/reference sketch batch."""
    if generated.shape != reference.shape:
        raise SketchError("generated and reference shapes must match")
    f_gen = features(as_rgb(generated))
    f_ref = features(as_rgb(reference))
    l_gram = torch.stack(
        [F.mse_loss(gram_matrix(g), gram_matrix(r))
         for g, r in zip(f_gen.levels(), f_ref.levels())]
    ).mean()
    d_fake = discriminator(generated)
    l_g = F.binary_cross_entropy_with_logits(d_fake, torch.ones_like(d_fake))
    l_cos = (1.0 - F.cosine_similarity(f_gen.f_e5, f_ref.f_e5, dim=1)).mean()
    if global_encoder is None:
        e_gen, e_ref = f_gen.f_e5, f_ref.f_e5
    else:
        e_gen, e_ref = global_encoder(as_rgb(generated)), global_encoder(as_rgb(reference))
    l_clip = F.mse_loss(e_gen, e_ref)
    components = {"gram": l_gram, "g": l_g, "cos": l_cos, "clip": l_clip}
    # accumulate in float64 so the total is exactly the weighted component sum
    total = (
        weights.gram * l_gram.double()
        + weights.g * l_g.double()
        + weights.cos * l_cos.double()
        + weights.clip * l_clip.double()
    )
    return total, components
