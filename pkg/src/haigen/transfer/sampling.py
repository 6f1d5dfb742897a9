"""Deterministic sketch coloring via the reverse trajectory.

The step-count knob is the published ablation set; every run records the
inputs' content hashes, the seed, and the model version so any output can
be reproduced bit for bit.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import torch

from ..diffusion import DiffusionSchedule, ddim_sample
from ..images import content_hash, to_png_bytes
from .embeddings import StyleEncoder, TransferError
from .model import STMDenoiser

ALLOWED_STEPS = (20, 50, 100, 200)


@dataclass(frozen=True)
class TransferRecord:
    steps: int
    seed: int
    model_version: str
    sketch_hash: str
    reference_hash: str

    def to_dict(self) -> dict:
        return asdict(self)


def transfer(
    sketch: torch.Tensor,
    reference_image: torch.Tensor,
    steps: int,
    seed: int,
    model: STMDenoiser,
    schedule: DiffusionSchedule,
    style_encoder: StyleEncoder,
) -> tuple[torch.Tensor, TransferRecord]:
    """Color one sketch in the reference image's style.

    Returns the (3, H, W) image in [0, 1] at the sketch's resolution plus
    the reproducibility record.
    """
    if model is None or style_encoder is None:
        raise TransferError("a trained model and style encoder are required")
    if steps not in ALLOWED_STEPS:
        raise TransferError(f"steps must be one of {ALLOWED_STEPS}, got {steps}")
    if sketch.dim() == 3:
        sketch = sketch[None]
    if sketch.dim() != 4 or sketch.shape[0] != 1:
        raise TransferError("transfer colors a single sketch at a time")
    if reference_image.dim() == 3:
        reference_image = reference_image[None]
    H, W = int(sketch.shape[2]), int(sketch.shape[3])
    was_training = model.training
    model.eval()
    try:
        with torch.no_grad():
            style = style_encoder(reference_image)
            x = ddim_sample(
                lambda x_t, t: model(x_t, t, sketch, style),
                shape=(1, model.cfg.image_channels, H, W),
                steps=steps, schedule=schedule, seed=seed,
                clip_x0=(0.0, 1.0),
            )
    finally:
        model.train(was_training)
    image = x[0].clamp(0.0, 1.0)
    record = TransferRecord(
        steps=steps, seed=int(seed), model_version=model.version,
        sketch_hash=content_hash(to_png_bytes(sketch[0])),
        reference_hash=content_hash(to_png_bytes(reference_image[0])),
    )
    return image, record
