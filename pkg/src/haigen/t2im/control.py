"""Zero-initialized control branch over a frozen encoder copy.

The branch duplicates the denoiser's encoder, injects the control image at
the input through a fixed projection, and emits one residual per decoder
input through 1x1 projections whose weights start at zero. Only those
projections train, so a fresh branch is exactly inert and the base model
never moves.
"""

from __future__ import annotations

import copy

import torch
from torch import nn
from torch.nn import functional as F

from .lora import AdapterError
from .unet import ToyLatentUNet, sinusoidal_time_embedding


class ControlBranch(nn.Module):
    """Condition path for a ToyLatentUNet.

    ``condition_shape`` is the expected (channels, height, width) of the
    control image; it is pooled to the latent grid and added to z_t before
    the frozen encoder copy runs.
    """

    def __init__(self, unet: ToyLatentUNet, condition_shape: tuple[int, int, int]):
        super().__init__()
        if len(condition_shape) != 3:
            raise AdapterError("condition_shape must be (channels, height, width)")
        self.cfg = unet.cfg
        self.condition_shape = tuple(int(v) for v in condition_shape)
        self.encoder_copy = copy.deepcopy(unet.encoder)
        self.encoder_copy.requires_grad_(False)
        self.time_mlp = copy.deepcopy(unet.time_mlp)
        self.time_mlp.requires_grad_(False)
        # fixed nonzero injection of the pooled condition into latent channels
        cond_in = nn.Conv2d(self.condition_shape[0], self.cfg.latent_channels, 1, bias=False)
        nn.init.constant_(cond_in.weight, 1.0 / self.condition_shape[0])
        cond_in.requires_grad_(False)
        self.cond_in = cond_in
        chans = list(self.cfg.level_channels)
        self.zero_projs = nn.ModuleList()
        for ch in chans + [chans[-1]]:  # one per encoder tap, plus the mid input
            proj = nn.Conv2d(ch, ch, 1)
            nn.init.zeros_(proj.weight)
            nn.init.zeros_(proj.bias)
            self.zero_projs.append(proj)

    def forward(
        self, z_t: torch.Tensor, t: int | torch.Tensor, text: torch.Tensor, c: torch.Tensor
    ) -> list[torch.Tensor]:
        if c.dim() == 3:
            c = c[None]
        if tuple(c.shape[1:]) != self.condition_shape:
            raise AdapterError(
                f"control image shape {tuple(c.shape[1:])} does not match "
                f"condition_shape {self.condition_shape}"
            )
        if c.shape[0] == 1 and z_t.shape[0] > 1:
            c = c.expand(z_t.shape[0], -1, -1, -1)
        if not torch.is_tensor(t):
            t = torch.full((z_t.shape[0],), int(t), dtype=torch.long)
        elif t.dim() == 0:
            t = t.expand(z_t.shape[0])
        if text.dim() == 2:
            text = text[None].expand(z_t.shape[0], -1, -1)
        hint = self.cond_in(F.adaptive_avg_pool2d(c, z_t.shape[-2:]))
        temb = self.time_mlp(sinusoidal_time_embedding(t, self.cfg.time_dim))
        h, taps = self.encoder_copy(z_t + hint, temb, text)
        residuals = [proj(tap) for proj, tap in zip(self.zero_projs, taps)]
        residuals.append(self.zero_projs[-1](h))
        return residuals

    def trainable_parameters(self) -> list[nn.Parameter]:
        return [p for p in self.zero_projs.parameters()]


def control_apply(
    branch: ControlBranch,
    z_t: torch.Tensor,
    t: int | torch.Tensor,
    c: torch.Tensor,
    text: torch.Tensor | None = None,
) -> list[torch.Tensor]:
    """Per-level residuals for the decoder; all zeros on a fresh branch."""
    if text is None:
        text = torch.zeros(1, branch.cfg.text_dim)
    return branch(z_t, t, text, c)
