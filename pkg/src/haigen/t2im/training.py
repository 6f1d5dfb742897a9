"""Adapter-only fine-tuning loop for the frozen text-to-image stack.

The base denoiser, codec, and text encoder never move; gradients flow only
into attached low-rank branches and the control branch's zero projections.
A checksum over frozen weights before/after each optimizer step enforces
that contract in test mode.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import torch

from ..diffusion import DiffusionSchedule
from .codec import LatentCodec
from .control import ControlBranch
from .unet import ToyLatentUNet


class FrozenWeightViolation(RuntimeError):
    """A parameter that must stay frozen changed during a training step."""


def frozen_checksum(module: torch.nn.Module) -> str:
    """Digest of every non-trainable parameter, order-stable by name."""
    h = hashlib.sha256()
    for name, p in sorted(module.named_parameters()):
        if not p.requires_grad:
            h.update(name.encode("utf-8"))
            h.update(p.detach().cpu().contiguous().numpy().tobytes())
    return h.hexdigest()


def parameter_counts(unet: ToyLatentUNet, branch: ControlBranch | None = None) -> tuple[int, int]:
    """(trainable, total) parameter counts across the denoiser and branch."""
    modules = [unet] + ([branch] if branch is not None else [])
    trainable = sum(p.numel() for m in modules for p in m.parameters() if p.requires_grad)
    total = sum(p.numel() for m in modules for p in m.parameters())
    return trainable, total


@dataclass
class T2IMBatch:
    images: torch.Tensor  # (B, 3, H, W) in [0, 1]
    prompts: list[str]
    controls: torch.Tensor | None = None  # (B, Cc, Hc, Wc)

    def __post_init__(self) -> None:
        if self.images.dim() != 4:
            raise ValueError("images must be (B, C, H, W)")
        if len(self.prompts) != self.images.shape[0]:
            raise ValueError("one prompt per image required")
        if self.controls is not None and self.controls.shape[0] != self.images.shape[0]:
            raise ValueError("one control per image required")


def t2im_train_step(
    batch: T2IMBatch,
    unet: ToyLatentUNet,
    codec: LatentCodec,
    schedule: DiffusionSchedule,
    text_encoder,
    branch: ControlBranch | None = None,
    optimizer: torch.optim.Optimizer | None = None,
    generator: torch.Generator | None = None,
    check_frozen: bool = False,
) -> float:
    """One noise-prediction step; returns the scalar loss value.

    With an optimizer, applies one update to whatever trainable parameters
    that optimizer holds. ``check_frozen=True`` verifies base weights are
    bit-identical afterwards and raises FrozenWeightViolation if not.
    """
    before = None
    if check_frozen:
        before = frozen_checksum(unet)
        if branch is not None:
            before += frozen_checksum(branch)
    with torch.no_grad():
        z0 = codec.encode(batch.images)
        text = text_encoder.encode_batch(batch.prompts)
    B = z0.shape[0]
    t = torch.randint(1, schedule.T + 1, (B,), generator=generator)
    alpha = torch.tensor([schedule.alpha_at(int(ti)) for ti in t], dtype=torch.float32)
    eps = torch.randn(z0.shape, generator=generator)
    a = alpha[:, None, None, None]
    z_t = a * z0 + (1 - a * a).sqrt() * eps
    control = branch(z_t, t, text, batch.controls) if branch is not None else None
    eps_hat = unet(z_t, t, text, control=control)
    loss = ((eps - eps_hat) ** 2).mean()
    if optimizer is not None:
        optimizer.zero_grad(set_to_none=True)
        loss.backward()
        optimizer.step()
    if check_frozen:
        after = frozen_checksum(unet)
        if branch is not None:
            after += frozen_checksum(branch)
        if after != before:
            raise FrozenWeightViolation("frozen base weights changed during the step")
    return float(loss.detach())


@dataclass
class T2IMTrainer:
    """Drives adapter fine-tuning; collects the per-step loss history."""

    unet: ToyLatentUNet
    codec: LatentCodec
    schedule: DiffusionSchedule
    text_encoder: object
    branch: ControlBranch | None = None
    lr: float = 1e-3
    seed: int = 0
    history: list[float] = field(default_factory=list)

    def __post_init__(self) -> None:
        params = [p for p in self.unet.parameters() if p.requires_grad]
        if self.branch is not None:
            params += self.branch.trainable_parameters()
        if not params:
            raise ValueError("nothing to train: attach adapters or a control branch first")
        self.optimizer = torch.optim.Adam(params, lr=self.lr)
        self.generator = torch.Generator().manual_seed(self.seed)

    def step(self, batch: T2IMBatch, check_frozen: bool = False) -> float:
        loss = t2im_train_step(
            batch, self.unet, self.codec, self.schedule, self.text_encoder,
            branch=self.branch, optimizer=self.optimizer,
            generator=self.generator, check_frozen=check_frozen,
        )
        self.history.append(loss)
        return loss

    def train(self, batches, check_frozen: bool = False) -> list[float]:
        for batch in batches:
            self.step(batch, check_frozen=check_frozen)
        return self.history
