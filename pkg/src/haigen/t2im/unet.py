"""Frozen toy latent UNet with named adapter attachment points.

A 3-level UNet over 16x16x4 latents: residual blocks, cross-attention to
text embeddings at every level, skip connections into the decoder. All base
weights are frozen at construction; the only trainable parameters are the
low-rank branches attached to the Q/K/V/out projections of the named
cross-attention blocks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import torch
from torch import nn
from torch.nn import functional as F

from .lora import AdaptedLinear, AdapterError, LoRAAdapter


def sinusoidal_time_embedding(t: torch.Tensor, dim: int) -> torch.Tensor:
    """Standard transformer sin/cos position features for integer timesteps."""
    if dim % 2:
        raise ValueError("embedding dim must be even")
    half = dim // 2
    freqs = torch.exp(-math.log(10000.0) * torch.arange(half, dtype=torch.float32) / half)
    ang = t.float()[:, None] * freqs[None, :]
    return torch.cat([torch.sin(ang), torch.cos(ang)], dim=-1)


@dataclass(frozen=True)
class UNetConfig:
    latent_channels: int = 4
    base_channels: int = 32
    channel_mults: tuple[int, ...] = (1, 2, 4)
    text_dim: int = 32
    time_dim: int = 64
    # which levels carry cross-attention (adapter attachment points)
    attn_levels: tuple[int, ...] = (0, 1, 2)
    norm_groups: int = 8
    seed: int = 0

    def __post_init__(self) -> None:
        if len(self.channel_mults) < 1:
            raise ValueError("need at least one level")
        for lvl in self.attn_levels:
            if not 0 <= lvl < len(self.channel_mults):
                raise ValueError(f"attn level {lvl} out of range")

    @property
    def level_channels(self) -> tuple[int, ...]:
        return tuple(self.base_channels * m for m in self.channel_mults)


class ResBlock(nn.Module):
    def __init__(self, in_ch: int, out_ch: int, time_dim: int, groups: int):
        super().__init__()
        self.norm1 = nn.GroupNorm(min(groups, in_ch), in_ch)
        self.conv1 = nn.Conv2d(in_ch, out_ch, 3, padding=1)
        self.time_proj = nn.Linear(time_dim, out_ch)
        self.norm2 = nn.GroupNorm(min(groups, out_ch), out_ch)
        self.conv2 = nn.Conv2d(out_ch, out_ch, 3, padding=1)
        self.skip = nn.Conv2d(in_ch, out_ch, 1) if in_ch != out_ch else nn.Identity()

    def forward(self, x: torch.Tensor, temb: torch.Tensor) -> torch.Tensor:
        h = self.conv1(F.silu(self.norm1(x)))
        h = h + self.time_proj(temb)[:, :, None, None]
        h = self.conv2(F.silu(self.norm2(h)))
        return h + self.skip(x)


class CrossAttention(nn.Module):
    """Single-head cross-attention from spatial features to token vectors.

    The four projections are AdaptedLinear slots named ``<block>.to_q`` etc,
    so adapters can target them individually.
    """

    def __init__(self, dim: int, text_dim: int, name: str, groups: int):
        super().__init__()
        self.name = name
        self.norm = nn.GroupNorm(min(groups, dim), dim)
        self.to_q = AdaptedLinear(dim, dim, name=f"{name}.to_q")
        self.to_k = AdaptedLinear(text_dim, dim, name=f"{name}.to_k")
        self.to_v = AdaptedLinear(text_dim, dim, name=f"{name}.to_v")
        self.to_out = AdaptedLinear(dim, dim, name=f"{name}.to_out")

    def forward(self, x: torch.Tensor, text: torch.Tensor) -> torch.Tensor:
        B, C, H, W = x.shape
        h = self.norm(x).reshape(B, C, H * W).transpose(1, 2)
        q = self.to_q(h)
        k = self.to_k(text)
        v = self.to_v(text)
        attn = torch.softmax(q @ k.transpose(-1, -2) / math.sqrt(C), dim=-1)
        out = self.to_out(attn @ v).transpose(1, 2).reshape(B, C, H, W)
        return x + out

    def projections(self) -> dict[str, AdaptedLinear]:
        return {p.name: p for p in (self.to_q, self.to_k, self.to_v, self.to_out)}


class _Level(nn.Module):
    def __init__(self, in_ch: int, out_ch: int, cfg: UNetConfig, name: str, attn: bool):
        super().__init__()
        self.res = ResBlock(in_ch, out_ch, cfg.time_dim, cfg.norm_groups)
        self.attn = CrossAttention(out_ch, cfg.text_dim, name, cfg.norm_groups) if attn else None

    def forward(self, x: torch.Tensor, temb: torch.Tensor, text: torch.Tensor) -> torch.Tensor:
        x = self.res(x, temb)
        if self.attn is not None:
            x = self.attn(x, text)
        return x


class UNetEncoder(nn.Module):
    """conv_in plus the down path; emits one tap per level for skips/control."""

    def __init__(self, cfg: UNetConfig):
        super().__init__()
        chans = cfg.level_channels
        self.conv_in = nn.Conv2d(cfg.latent_channels, chans[0], 3, padding=1)
        self.levels = nn.ModuleList()
        self.downs = nn.ModuleList()
        prev = chans[0]
        for i, ch in enumerate(chans):
            self.levels.append(_Level(prev, ch, cfg, f"enc{i}", i in cfg.attn_levels))
            self.downs.append(
                nn.Conv2d(ch, ch, 3, stride=2, padding=1) if i < len(chans) - 1 else nn.Identity()
            )
            prev = ch

    def forward(
        self, z: torch.Tensor, temb: torch.Tensor, text: torch.Tensor
    ) -> tuple[torch.Tensor, list[torch.Tensor]]:
        h = self.conv_in(z)
        taps: list[torch.Tensor] = []
        for level, down in zip(self.levels, self.downs):
            h = level(h, temb, text)
            taps.append(h)
            h = down(h)
        return h, taps


class ToyLatentUNet(nn.Module):
    """Frozen epsilon-predictor: ``model(z_t, t, text, control=None)``.

    ``control`` is an optional list of residual tensors, one per encoder tap
    (highest resolution first) plus a final one for the mid block input;
    each is added to the matching decoder input.
    """

    def __init__(self, cfg: UNetConfig | None = None):
        super().__init__()
        self.cfg = cfg = cfg or UNetConfig()
        torch.manual_seed(cfg.seed)
        chans = cfg.level_channels
        self.time_mlp = nn.Sequential(
            nn.Linear(cfg.time_dim, cfg.time_dim), nn.SiLU(), nn.Linear(cfg.time_dim, cfg.time_dim)
        )
        self.encoder = UNetEncoder(cfg)
        self.mid1 = ResBlock(chans[-1], chans[-1], cfg.time_dim, cfg.norm_groups)
        self.mid_attn = CrossAttention(chans[-1], cfg.text_dim, "mid", cfg.norm_groups)
        self.mid2 = ResBlock(chans[-1], chans[-1], cfg.time_dim, cfg.norm_groups)
        self.dec_levels = nn.ModuleList()
        self.ups = nn.ModuleList()
        for i in reversed(range(len(chans))):
            in_from_above = chans[i + 1] if i + 1 < len(chans) else chans[-1]
            self.ups.append(
                nn.ConvTranspose2d(in_from_above, chans[i], 2, stride=2)
                if i + 1 < len(chans)
                else nn.Identity()
            )
            skip_in = chans[i] if i + 1 < len(chans) else chans[-1]
            self.dec_levels.append(
                _Level(skip_in + chans[i], chans[i], cfg, f"dec{i}", i in cfg.attn_levels)
            )
        self.out_norm = nn.GroupNorm(min(cfg.norm_groups, chans[0]), chans[0])
        self.out_conv = nn.Conv2d(chans[0], cfg.latent_channels, 3, padding=1)
        self.requires_grad_(False)

    def forward(
        self,
        z: torch.Tensor,
        t: int | torch.Tensor,
        text: torch.Tensor,
        control: list[torch.Tensor] | None = None,
    ) -> torch.Tensor:
        if z.dim() != 4 or z.shape[1] != self.cfg.latent_channels:
            raise ValueError(f"expected (B, {self.cfg.latent_channels}, h, w), got {tuple(z.shape)}")
        if not torch.is_tensor(t):
            t = torch.full((z.shape[0],), int(t), dtype=torch.long)
        elif t.dim() == 0:
            t = t.expand(z.shape[0])
        if text.dim() == 2:
            text = text[None].expand(z.shape[0], -1, -1)
        temb = self.time_mlp(sinusoidal_time_embedding(t, self.cfg.time_dim))
        h, skips = self.encoder(z, temb, text)
        if control is not None:
            if len(control) != len(skips) + 1:
                raise ValueError(f"expected {len(skips) + 1} control residuals, got {len(control)}")
            skips = [s + r for s, r in zip(skips, control[:-1])]
            h = h + control[-1]
        h = self.mid2(self.mid_attn(self.mid1(h, temb), text), temb)
        for up, level, skip in zip(self.ups, self.dec_levels, reversed(skips)):
            h = up(h)
            h = level(torch.cat([h, skip], dim=1), temb, text)
        return self.out_conv(F.silu(self.out_norm(h)))

    def adapted_linears(self) -> dict[str, AdaptedLinear]:
        """All adapter attachment slots, keyed by projection name."""
        slots: dict[str, AdaptedLinear] = {}
        for module in self.modules():
            if isinstance(module, CrossAttention):
                slots.update(module.projections())
        return slots

    def base_weights(self) -> dict[str, torch.Tensor]:
        return {name: slot.base.weight for name, slot in self.adapted_linears().items()}

    def attach_adapters(self, adapters: list[LoRAAdapter], trainable: bool = True) -> list:
        slots = self.adapted_linears()
        branches = []
        for adapter in adapters:
            if adapter.name not in slots:
                raise AdapterError(f"no projection named {adapter.name!r}")
            branches.append(slots[adapter.name].attach(adapter, trainable=trainable))
        return branches

    def detach_adapters(self) -> None:
        for slot in self.adapted_linears().values():
            slot.detach_all()


def make_lora_adapters(
    unet: ToyLatentUNet,
    rank: int = 2,
    scale: float = 1.0,
    seed: int = 0,
    targets: list[str] | None = None,
    name_prefix: str = "",
) -> list[LoRAAdapter]:
    """Fresh zero-residual adapters for the selected projections (all by default)."""
    slots = unet.adapted_linears()
    chosen = list(slots) if targets is None else targets
    adapters = []
    for i, name in enumerate(sorted(chosen)):
        if name not in slots:
            raise AdapterError(f"no projection named {name!r}")
        slot = slots[name]
        adapters.append(
            LoRAAdapter.create(
                name=name, d=slot.in_features, k=slot.out_features,
                rank=rank, scale=scale, seed=seed * 10007 + i,
            )
        )
    return adapters
