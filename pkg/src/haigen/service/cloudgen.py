"""Cloud-side inspiration generator: seeded latent diffusion over a toy stack.

The generator owns a frozen text encoder, a frozen latent UNet, a patch codec
fitted once on a seeded synthetic corpus, a registry of named style adapters,
and a registry of named silhouette control presets. Identical
(prompt, seed, adapter_ids, control_preset_id, size) inputs produce
byte-identical PNG outputs. Request validation happens in the schema layer
before this module runs any model code; here only registry membership is
checked, again before sampling.
"""

from __future__ import annotations

import threading

import numpy as np
import torch

from ..diffusion import ddim_sample, make_schedule
from ..images import to_png_bytes
from ..synth import _outline, _shape_mask, flat_color, make_shape_pairs, PALETTE
from ..t2im import (
    ControlBranch,
    LatentCodec,
    LoRAAdapter,
    ToyLatentUNet,
    ToyTextEncoder,
    UNetConfig,
    control_apply,
    make_lora_adapters,
)
from .schema import CloudRequest


class GenerationError(ValueError):
    """Raised for unknown adapter or preset ids, before any sampling work."""


def _warm_adapters(unet: ToyLatentUNet, seed: int, rank: int = 2,
                   scale: float = 1.0, gain: float = 0.25) -> list[LoRAAdapter]:
    """Adapters with seeded nonzero up factors, so they actually shift outputs."""
    fresh = make_lora_adapters(unet, rank=rank, scale=scale, seed=seed)
    gen = torch.Generator().manual_seed(seed * 31 + 1)
    warmed = []
    for a in fresh:
        up = torch.randn(a.k, a.rank, generator=gen) * (gain / a.rank)
        warmed.append(LoRAAdapter(name=a.name, down=a.down, up=up, scale=a.scale))
    return warmed


def _preset_condition(kind: int, size: int) -> torch.Tensor:
    """Centered stroke drawing of one silhouette, as a (1, size, size) tensor."""
    mask = _shape_mask(kind, size, size * 0.5, size * 0.5, size * 0.3)
    cond = np.ones((size, size), dtype=np.float32)
    cond[_outline(mask)] = 0.0
    return torch.from_numpy(cond)[None]


class CloudGenerator:
    """Deterministic text-to-image sampler behind the cloud endpoints."""

    ADAPTER_SEEDS = {"bold-lines": 101, "pastel-wash": 202, "soft-grain": 303}
    PRESET_KINDS = {
        "silhouette-circle": 0,
        "silhouette-square": 1,
        "silhouette-triangle": 2,
        "silhouette-diamond": 3,
    }

    def __init__(self, image_size: int = 64, steps: int = 20, seed: int = 0) -> None:
        if image_size % 4 != 0:
            raise GenerationError("image_size must be divisible by the codec patch")
        self.image_size = image_size
        self.steps = steps
        self._lock = threading.Lock()
        self.text_encoder = ToyTextEncoder(dim=32, seed=seed + 7)
        self.unet = ToyLatentUNet(UNetConfig(seed=seed + 11))
        self.codec = LatentCodec(patch=4, latent_channels=4)
        fit_images, _ = make_shape_pairs(24, image_size, seed=seed + 17)
        flats = torch.stack([flat_color(rgb, image_size) for rgb in PALETTE])
        self.codec.fit(torch.cat([fit_images, flats]))
        self.schedule = make_schedule(T=50, alpha_start=0.9999, alpha_end=0.10)
        self.adapters = {
            slug: _warm_adapters(self.unet, s) for slug, s in self.ADAPTER_SEEDS.items()
        }
        self.control = ControlBranch(self.unet, (1, image_size, image_size))
        gen = torch.Generator().manual_seed(seed + 23)
        # Presets share one branch; seeded nonzero taps make conditions matter.
        with torch.no_grad():
            for proj in self.control.zero_projs:
                proj.weight.copy_(torch.randn(proj.weight.shape, generator=gen) * 0.05)
                proj.bias.copy_(torch.randn(proj.bias.shape, generator=gen) * 0.05)
        self.presets = {
            slug: _preset_condition(kind, image_size)
            for slug, kind in self.PRESET_KINDS.items()
        }

    def available_adapters(self) -> list[str]:
        return sorted(self.adapters)

    def available_presets(self) -> list[str]:
        return sorted(self.presets)

    def _check_registries(self, req: CloudRequest) -> None:
        for slug in req.adapter_ids:
            if slug not in self.adapters:
                raise GenerationError(f"unknown adapter id {slug!r}")
        if req.control_preset_id is not None and req.control_preset_id not in self.presets:
            raise GenerationError(f"unknown control preset {req.control_preset_id!r}")
        if (req.width, req.height) != (self.image_size, self.image_size):
            raise GenerationError(
                f"this deployment renders {self.image_size}x{self.image_size} only"
            )

    def generate(self, req: CloudRequest) -> list[tuple[bytes, dict]]:
        """Render ``req.count`` PNGs; raises GenerationError before any sampling."""
        self._check_registries(req)
        grid = self.image_size // self.codec.patch
        shape = (1, self.codec.latent_channels, grid, grid)
        results: list[tuple[bytes, dict]] = []
        with self._lock, torch.no_grad():
            text = self.text_encoder.encode(req.prompt).p
            condition = self.presets.get(req.control_preset_id) \
                if req.control_preset_id else None
            self.unet.detach_adapters()
            try:
                for slug in req.adapter_ids:
                    self.unet.attach_adapters(self.adapters[slug], trainable=False)

                def model(x_t: torch.Tensor, t: int) -> torch.Tensor:
                    residuals = None
                    if condition is not None:
                        residuals = control_apply(self.control, x_t, t, condition, text)
                    return self.unet(x_t, t, text, control=residuals)

                for i in range(req.count):
                    item_seed = (req.seed + i) % 2**63
                    z = ddim_sample(
                        model, shape, steps=self.steps, schedule=self.schedule,
                        seed=item_seed, clip_x0=(-3.0, 3.0),
                    )
                    image = self.codec.decode(z)[0].clamp(0.0, 1.0)
                    png = to_png_bytes(image)
                    results.append((png, {
                        "prompt": req.prompt,
                        "seed": item_seed,
                        "adapter_ids": list(req.adapter_ids),
                        "control_preset_id": req.control_preset_id,
                        "steps": self.steps,
                        "width": self.image_size,
                        "height": self.image_size,
                    }))
            finally:
                self.unet.detach_adapters()
        return results
