"""Decoder building blocks: spectrally bounded convs and the fusion block.

Spectral normalization here bounds the norm of the convolution as an
operator on feature maps, estimated by power iteration with the exact
conv/conv-transpose adjoint pair. Reshaping the kernel to a matrix (the
usual shortcut) underestimates that norm, so it would not honor the <= 1
bound this module promises.
"""

from __future__ import annotations

import torch
from torch import nn
from torch.nn import functional as F

from .encoder import SketchError


def conv_operator_norm(
    weight: torch.Tensor,
    size: tuple[int, int],
    padding: int = 1,
    iters: int = 100,
    seed: int = 0,
) -> float:
    """Power-iteration estimate of the conv operator's largest singular value
    at the given input spatial size."""
    out_ch = weight.shape[0]
    gen = torch.Generator().manual_seed(seed)
    u = torch.randn(1, out_ch, size[0], size[1], generator=gen, dtype=weight.dtype)
    u = u / u.norm()
    with torch.no_grad():
        for _ in range(max(1, iters)):
            v = F.conv_transpose2d(u, weight, padding=padding)
            v = v / (v.norm() + 1e-12)
            u = F.conv2d(v, weight, padding=padding)
            sigma = u.norm()
            u = u / (sigma + 1e-12)
    return float(sigma)


class SpectralNormConv2d(nn.Module):
    """3x3 same-padding conv whose operator norm is held at ~1.

    One power-iteration step per training forward keeps the singular vector
    estimates current; eval mode reuses them (after a longer warm start on
    first use at a given input size) so inference is deterministic.
    """

    def __init__(
        self,
        in_channels: int,
        out_channels: int,
        kernel_size: int = 3,
        padding: int = 1,
        bias: bool = True,
        power_iterations: int = 1,
        init_iterations: int = 100,
    ):
        super().__init__()
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.padding = padding
        self.power_iterations = power_iterations
        self.init_iterations = init_iterations
        self.weight = nn.Parameter(torch.empty(out_channels, in_channels, kernel_size, kernel_size))
        nn.init.kaiming_uniform_(self.weight, a=0.2)
        self.bias = nn.Parameter(torch.zeros(out_channels)) if bias else None
        self._u: dict[tuple[int, int], torch.Tensor] = {}
        self._v: dict[tuple[int, int], torch.Tensor] = {}

    def _sigma(self, size: tuple[int, int]) -> torch.Tensor:
        key = size
        with torch.no_grad():
            if key not in self._u:
                gen = torch.Generator().manual_seed(size[0] * 100003 + size[1])
                u = torch.randn(1, self.out_channels, *size, generator=gen,
                                dtype=self.weight.dtype)
                self._u[key] = u / u.norm()
                iters = self.init_iterations
            else:
                iters = self.power_iterations if self.training else 0
            u = self._u[key]
            v = self._v.get(key)
            for _ in range(iters):
                v = F.conv_transpose2d(u, self.weight, padding=self.padding)
                v = v / (v.norm() + 1e-12)
                u = F.conv2d(v, self.weight, padding=self.padding)
                u = u / (u.norm() + 1e-12)
            if v is None:  # cache hit with zero refresh steps still needs v
                v = F.conv_transpose2d(u, self.weight, padding=self.padding)
                v = v / (v.norm() + 1e-12)
            self._u[key], self._v[key] = u, v
        sigma = torch.sum(self._u[key] * F.conv2d(self._v[key], self.weight, padding=self.padding))
        return sigma.clamp_min(1e-12)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if x.dim() != 4 or x.shape[1] != self.in_channels:
            raise SketchError(f"expected (B, {self.in_channels}, H, W), got {tuple(x.shape)}")
        sigma = self._sigma((int(x.shape[2]), int(x.shape[3])))
        return F.conv2d(x, self.weight / sigma, self.bias, padding=self.padding)


class ConvBlock(nn.Module):
    """LeakyReLU(BN(SN(Conv3x3(x)))), spatial dims preserved."""

    def __init__(self, in_channels: int, out_channels: int, slope: float = 0.2):
        super().__init__()
        self.conv = SpectralNormConv2d(in_channels, out_channels)
        self.bn = nn.BatchNorm2d(out_channels)
        self.act = nn.LeakyReLU(slope)
        self.slope = slope

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.act(self.bn(self.conv(x)))


class DSMFF(nn.Module):
    """Fuse an encoder feature with the coarser decoder feature.

    D1 = Conv(maxpool(f_e)); D2 = Conv(upsample(cat(D1, f_d)));
    out = Conv(D2 + gamma * f_e), at f_e's resolution.
    """

    def __init__(self, channels: int, slope: float = 0.2, gamma_init: float = 1.0):
        super().__init__()
        self.channels = channels
        self.conv_d1 = ConvBlock(channels, channels, slope)
        self.conv_d2 = ConvBlock(2 * channels, channels, slope)
        self.conv_out = ConvBlock(channels, channels, slope)
        self.gamma = nn.Parameter(torch.tensor(float(gamma_init)))

    def forward(self, f_e: torch.Tensor, f_d: torch.Tensor) -> torch.Tensor:
        if f_e.dim() != 4 or f_d.dim() != 4:
            raise SketchError("DSMFF expects 4d feature maps")
        if f_e.shape[1] != self.channels or f_d.shape[1] != self.channels:
            raise SketchError(
                f"channel mismatch: block width {self.channels}, "
                f"got f_e {f_e.shape[1]} and f_d {f_d.shape[1]}"
            )
        if f_d.shape[2] * 2 != f_e.shape[2] or f_d.shape[3] * 2 != f_e.shape[3]:
            raise SketchError(
                f"f_d {tuple(f_d.shape[2:])} must be half of f_e {tuple(f_e.shape[2:])}"
            )
        d1 = self.conv_d1(F.max_pool2d(f_e, 2))
        d2 = self.conv_d2(F.interpolate(torch.cat([d1, f_d], dim=1), scale_factor=2,
                                        mode="nearest"))
        return self.conv_out(d2 + self.gamma * f_e)
