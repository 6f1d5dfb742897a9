"""Quantitative image metrics with strict, oracle-friendly definitions.

All functions are pure and deterministic. Conventions that matter for
reproducibility: PSNR returns +inf when the error is exactly zero; SSIM
uses an 8x8 uniform window with the standard stabilizing constants and
averages over channels; FID fits Gaussians with unbiased (N-1) covariance
and regularizes both covariances by 1e-6*I before the matrix square root;
LPIPS normalizes per-layer features to unit channel norm and averages
squared differences, over a pluggable perceptual net.
"""

from __future__ import annotations

import datetime as _dt
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
from scipy import linalg as _sla
from torch.nn import functional as F

FID_EPS = 1e-6
SSIM_WINDOW = 8
SSIM_C1 = 0.01 ** 2
SSIM_C2 = 0.03 ** 2


class MetricError(ValueError):
    pass


def _pair(a: torch.Tensor, b: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
    if a.shape != b.shape:
        raise MetricError(f"shape mismatch: {tuple(a.shape)} vs {tuple(b.shape)}")
    return a.double(), b.double()


def mse(a: torch.Tensor, b: torch.Tensor) -> float:
    a, b = _pair(a, b)
    return float(((a - b) ** 2).mean())


def psnr(a: torch.Tensor, b: torch.Tensor, peak: float = 1.0) -> float:
    """10*log10(peak^2 / mse); +inf on exact equality."""
    if peak <= 0:
        raise MetricError("peak must be positive")
    err = mse(a, b)
    if err == 0.0:
        return float("inf")
    return 10.0 * math.log10(peak * peak / err)


def _as_bchw(x: torch.Tensor) -> torch.Tensor:
    if x.dim() == 2:
        return x[None, None]
    if x.dim() == 3:
        return x[None]
    if x.dim() == 4:
        return x
    raise MetricError(f"expected 2-4 dims, got {x.dim()}")


def ssim(a: torch.Tensor, b: torch.Tensor, window: int = SSIM_WINDOW,
         c1: float = SSIM_C1, c2: float = SSIM_C2) -> float:
    """Uniform-window structural similarity, averaged over windows and channels."""
    a4, b4 = _as_bchw(a).double(), _as_bchw(b).double()
    if a4.shape != b4.shape:
        raise MetricError(f"shape mismatch: {tuple(a.shape)} vs {tuple(b.shape)}")
    if window > a4.shape[2] or window > a4.shape[3]:
        raise MetricError(f"window {window} exceeds image {tuple(a4.shape[2:])}")
    mu_a = F.avg_pool2d(a4, window, stride=1)
    mu_b = F.avg_pool2d(b4, window, stride=1)
    var_a = F.avg_pool2d(a4 * a4, window, stride=1) - mu_a * mu_a
    var_b = F.avg_pool2d(b4 * b4, window, stride=1) - mu_b * mu_b
    cov = F.avg_pool2d(a4 * b4, window, stride=1) - mu_a * mu_b
    num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
    den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2)
    return float((num / den).mean())


def fid(features_a: torch.Tensor | np.ndarray, features_b: torch.Tensor | np.ndarray,
        eps: float = FID_EPS) -> float:
    """Frechet distance between Gaussians fit to two feature sets (N x D)."""
    fa = np.asarray(features_a, dtype=np.float64)
    fb = np.asarray(features_b, dtype=np.float64)
    if fa.ndim != 2 or fb.ndim != 2 or fa.shape[1] != fb.shape[1]:
        raise MetricError("feature sets must be (N, D) with matching D")
    if fa.shape[0] < 2 or fb.shape[0] < 2:
        raise MetricError("need at least 2 samples per set")
    mu_a, mu_b = fa.mean(axis=0), fb.mean(axis=0)
    cov_a = np.cov(fa, rowvar=False) + eps * np.eye(fa.shape[1])
    cov_b = np.cov(fb, rowvar=False) + eps * np.eye(fb.shape[1])
    covmean = _sla.sqrtm(cov_a @ cov_b)
    if np.iscomplexobj(covmean):
        covmean = covmean.real
    d = mu_a - mu_b
    value = float(d @ d + np.trace(cov_a + cov_b - 2.0 * covmean))
    return max(value, 0.0)


class _DefaultPerceptualNet:
    """Frozen sketch-backbone taps with unit layer weights."""

    _shared = None

    def __init__(self):
        from .sketch.encoder import SketchEncoder, as_rgb

        self._encoder = SketchEncoder()
        self._as_rgb = as_rgb

    @classmethod
    def shared(cls) -> "_DefaultPerceptualNet":
        if cls._shared is None:
            cls._shared = cls()
        return cls._shared

    def __call__(self, x: torch.Tensor) -> list[torch.Tensor]:
        return self._encoder(self._as_rgb(x)).levels()


def lpips(a: torch.Tensor, b: torch.Tensor, perceptual_net=None, strict: bool = False) -> float:
    """Mean squared distance between unit-normalized per-layer features."""
    if perceptual_net is None:
        if strict:
            raise MetricError("no perceptual net installed")
        perceptual_net = _DefaultPerceptualNet.shared()
    a4, b4 = _as_bchw(a).float(), _as_bchw(b).float()
    if a4.shape != b4.shape:
        raise MetricError(f"shape mismatch: {tuple(a.shape)} vs {tuple(b.shape)}")
    with torch.no_grad():
        feats_a = perceptual_net(a4)
        feats_b = perceptual_net(b4)
    total = 0.0
    for fa, fb in zip(feats_a, feats_b):
        na = fa / fa.norm(dim=1, keepdim=True).clamp_min(1e-10)
        nb = fb / fb.norm(dim=1, keepdim=True).clamp_min(1e-10)
        total += float(((na - nb) ** 2).mean())
    return total / len(feats_a)


@dataclass
class MetricReport:
    psnr: float
    ssim: float
    mse: float
    lpips: float
    fid: float
    sample_counts: dict[str, int]

    def __post_init__(self) -> None:
        zero_err = self.mse == 0.0
        if zero_err != math.isinf(self.psnr):
            raise MetricError("psnr sentinel inconsistent with mse")

    def to_dict(self) -> dict:
        rec = {
            "psnr": None if math.isinf(self.psnr) else self.psnr,
            "ssim": self.ssim, "mse": self.mse, "lpips": self.lpips, "fid": self.fid,
            "sample_counts": dict(self.sample_counts),
        }
        return rec


def default_fid_features(images: torch.Tensor) -> torch.Tensor:
    """Pooled deep-tap features from the frozen sketch backbone."""
    net = _DefaultPerceptualNet.shared()
    with torch.no_grad():
        taps = net(_as_bchw(images).float())
    return taps[3].mean(dim=(2, 3))


def evaluate_pair(
    generated: torch.Tensor,
    reference: torch.Tensor,
    perceptual_net=None,
    feature_fn=default_fid_features,
) -> MetricReport:
    """All five metrics over aligned (B, C, H, W) batches."""
    g4, r4 = _as_bchw(generated), _as_bchw(reference)
    if g4.shape != r4.shape:
        raise MetricError("batches must align")
    return MetricReport(
        psnr=psnr(g4, r4),
        ssim=ssim(g4, r4),
        mse=mse(g4, r4),
        lpips=lpips(g4, r4, perceptual_net=perceptual_net),
        fid=fid(feature_fn(g4), feature_fn(r4)),
        sample_counts={"generated": int(g4.shape[0]), "reference": int(r4.shape[0])},
    )


def write_metric_records(
    path: str | Path, report: MetricReport, model_version: str, dataset_hash: str
) -> None:
    """Append one structured record per evaluation run."""
    record = {
        "model_version": model_version,
        "dataset_hash": dataset_hash,
        "created_at": _dt.datetime.now(_dt.timezone.utc).isoformat(),
        "metrics": report.to_dict(),
    }
    with open(path, "a", encoding="utf-8") as fh:
        fh.write(json.dumps(record) + "\n")
