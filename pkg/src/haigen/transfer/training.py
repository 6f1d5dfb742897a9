"""Noise-prediction training for the coloring model.

Each step draws per-sample timesteps, diffuses the target image, and asks
the denoiser for the noise given the sketch and a style embedding. The
style reference defaults to the target image itself, so training needs only
image/sketch pairs; at inference the reference is arbitrary.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import torch

from ..diffusion import DiffusionSchedule
from .embeddings import StyleEncoder, TransferError
from .model import STMDenoiser


@dataclass
class STMBatch:
    sketch: torch.Tensor  # (B, 1, H, W)
    target: torch.Tensor  # (B, 3, H, W)
    reference: torch.Tensor | None = None  # style reference, defaults to target

    def __post_init__(self) -> None:
        if self.sketch.dim() != 4 or self.target.dim() != 4:
            raise TransferError("sketch and target must be batched 4d tensors")
        if self.sketch.shape[0] != self.target.shape[0]:
            raise TransferError("sketch and target batch sizes differ")
        if self.sketch.shape[-2:] != self.target.shape[-2:]:
            raise TransferError(
                f"sketch {tuple(self.sketch.shape[-2:])} must be resampled to the "
                f"target size {tuple(self.target.shape[-2:])}"
            )


def stm_train_step(
    batch: STMBatch,
    model: STMDenoiser,
    schedule: DiffusionSchedule,
    style_encoder: StyleEncoder,
    optimizer: torch.optim.Optimizer | None = None,
    generator: torch.Generator | None = None,
) -> float:
    """One objective evaluation; applies the optimizer when given."""
    x0 = batch.target
    reference = batch.reference if batch.reference is not None else x0
    B = x0.shape[0]
    t = torch.randint(1, schedule.T + 1, (B,), generator=generator)
    alpha = torch.tensor([schedule.alpha_at(int(ti)) for ti in t], dtype=torch.float32)
    eps = torch.randn(x0.shape, generator=generator)
    a = alpha[:, None, None, None]
    x_t = a * x0 + (1 - a * a).sqrt() * eps
    style = style_encoder(reference)
    eps_hat = model(x_t, t, batch.sketch, style)
    loss = ((eps - eps_hat) ** 2).mean()
    if optimizer is not None:
        optimizer.zero_grad(set_to_none=True)
        loss.backward()
        optimizer.step()
    return float(loss.detach())


@dataclass
class STMTrainer:
    """Joint optimizer over the denoiser and style encoder."""

    model: STMDenoiser
    style_encoder: StyleEncoder
    schedule: DiffusionSchedule
    lr: float = 1e-4
    batch_size: int = 8
    seed: int = 0
    conditioning_lr_mult: float = 1.0
    history: list[float] = field(default_factory=list)

    def __post_init__(self) -> None:
        # Zero-initialized conditioning gates see no gradient until they open;
        # a multiplier > 1 lets short runs train them at a faster rate.
        gate_names = {n for n, _ in self.model.named_parameters() if n.startswith("ccams.")}
        base = [p for n, p in self.model.named_parameters() if n not in gate_names]
        cond = [p for n, p in self.model.named_parameters() if n in gate_names]
        cond += list(self.style_encoder.parameters())
        self.optimizer = torch.optim.Adam(
            [
                {"params": base, "lr": self.lr},
                {"params": cond, "lr": self.lr * self.conditioning_lr_mult},
            ]
        )
        self.generator = torch.Generator().manual_seed(self.seed)

    def step(self, batch: STMBatch) -> float:
        loss = stm_train_step(
            batch, self.model, self.schedule, self.style_encoder,
            optimizer=self.optimizer, generator=self.generator,
        )
        self.history.append(loss)
        return loss

    def train(self, sketches: torch.Tensor, targets: torch.Tensor, steps: int) -> list[float]:
        """Cycle minibatches from fixed pairs; style reference is the target."""
        n = targets.shape[0]
        for _ in range(steps):
            idx = torch.randperm(n, generator=self.generator)[: self.batch_size]
            self.step(STMBatch(sketch=sketches[idx], target=targets[idx]))
        return self.history
