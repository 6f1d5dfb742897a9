"""Adversarial training loop for the sketch generator.

Alternates one critic step with one generator step per batch. Defaults
follow the reference recipe (SGD, lr 2e-4, momentum 0.9, batch 8); smoke
configurations may raise the learning rate to converge within a test
budget, which changes nothing about the objective.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import torch

from .apsn import DesignerStyleStats
from .losses import LossWeights, PatchDiscriminator, discriminator_loss, i2s_loss
from .model import SketchGenerator


@dataclass(frozen=True)
class I2SMTrainConfig:
    lr: float = 2e-4
    momentum: float = 0.9
    batch_size: int = 8
    disc_lr: float | None = None  # defaults to lr
    weights: LossWeights = field(default_factory=LossWeights)
    seed: int = 0


class I2SMTrainer:
    def __init__(
        self,
        model: SketchGenerator,
        stats: DesignerStyleStats,
        cfg: I2SMTrainConfig | None = None,
        discriminator: PatchDiscriminator | None = None,
        global_encoder=None,
    ):
        self.model = model
        self.stats = stats
        self.cfg = cfg or I2SMTrainConfig()
        torch.manual_seed(self.cfg.seed)
        self.discriminator = discriminator if discriminator is not None else PatchDiscriminator()
        self.global_encoder = global_encoder
        self.opt_g = torch.optim.SGD(
            model.trainable_parameters(), lr=self.cfg.lr, momentum=self.cfg.momentum
        )
        self.opt_d = torch.optim.SGD(
            self.discriminator.parameters(),
            lr=self.cfg.disc_lr if self.cfg.disc_lr is not None else self.cfg.lr,
            momentum=self.cfg.momentum,
        )
        self.history: list[dict[str, float]] = []

    def step(self, images: torch.Tensor, sketches: torch.Tensor) -> dict[str, float]:
        """One critic update then one generator update on a paired batch."""
        self.model.train()
        self.discriminator.train()
        generated = self.model(images, self.stats)

        self.opt_d.zero_grad(set_to_none=True)
        d_loss = discriminator_loss(self.discriminator, sketches, generated.detach())
        d_loss.backward()
        self.opt_d.step()

        self.opt_g.zero_grad(set_to_none=True)
        total, comps = i2s_loss(
            generated, sketches, self.model.encoder, self.discriminator,
            global_encoder=self.global_encoder, weights=self.cfg.weights,
        )
        total.backward()
        self.opt_g.step()

        record = {k: float(v.detach()) for k, v in comps.items()}
        record["total"] = float(total.detach())
        record["d"] = float(d_loss.detach())
        self.history.append(record)
        return record

    def train(self, images: torch.Tensor, sketches: torch.Tensor, steps: int,
              generator: torch.Generator | None = None) -> list[dict[str, float]]:
        """Cycle minibatches from a fixed paired set for the given step count."""
        n = images.shape[0]
        gen = generator or torch.Generator().manual_seed(self.cfg.seed)
        for _ in range(steps):
            idx = torch.randperm(n, generator=gen)[: self.cfg.batch_size]
            self.step(images[idx], sketches[idx])
        return self.history
