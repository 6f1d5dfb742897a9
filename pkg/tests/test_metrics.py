"""Flat-loop oracles and invariants for the image quality metrics."""

import json
import math

import numpy as np
import pytest
import torch

from haigen.metrics import (
    FID_EPS,
    MetricError,
    MetricReport,
    default_fid_features,
    evaluate_pair,
    fid,
    lpips,
    mse,
    psnr,
    ssim,
    write_metric_records,
)


def _mse_oracle(a: torch.Tensor, b: torch.Tensor) -> float:
    fa = a.double().flatten().tolist()
    fb = b.double().flatten().tolist()
    return sum((x - y) ** 2 for x, y in zip(fa, fb)) / len(fa)


def _ssim_oracle(a: torch.Tensor, b: torch.Tensor, window: int = 8) -> float:
    c1, c2 = 0.01 ** 2, 0.03 ** 2
    a4 = a.double().numpy()
    b4 = b.double().numpy()
    vals = []
    B, C, H, W = a4.shape
    n = window * window
    for bi in range(B):
        for ci in range(C):
            for i in range(H - window + 1):
                for j in range(W - window + 1):
                    wa = a4[bi, ci, i:i + window, j:j + window]
                    wb = b4[bi, ci, i:i + window, j:j + window]
                    mu_a = float(wa.sum()) / n
                    mu_b = float(wb.sum()) / n
                    var_a = float((wa * wa).sum()) / n - mu_a * mu_a
                    var_b = float((wb * wb).sum()) / n - mu_b * mu_b
                    cov = float((wa * wb).sum()) / n - mu_a * mu_b
                    num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
                    den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2)
                    vals.append(num / den)
    return sum(vals) / len(vals)


def _fid_oracle(fa: np.ndarray, fb: np.ndarray, eps: float = FID_EPS) -> float:
    """Frechet distance via eigenvalues of the covariance product."""
    fa = np.asarray(fa, dtype=np.float64)
    fb = np.asarray(fb, dtype=np.float64)
    mu_a, mu_b = fa.mean(axis=0), fb.mean(axis=0)
    cov_a = np.cov(fa, rowvar=False) + eps * np.eye(fa.shape[1])
    cov_b = np.cov(fb, rowvar=False) + eps * np.eye(fb.shape[1])
    eigvals = np.linalg.eigvals(cov_a @ cov_b)
    trace_sqrt = float(np.sqrt(np.clip(eigvals.real, 0.0, None)).sum())
    d = mu_a - mu_b
    return max(float(d @ d + np.trace(cov_a) + np.trace(cov_b) - 2.0 * trace_sqrt), 0.0)


# ---- mse / psnr -------------------------------------------------------------


def test_mse_psnr_match_flat_oracle():
    gen = torch.Generator().manual_seed(0)
    for _ in range(10):
        a = torch.rand(2, 3, 6, 5, generator=gen)
        b = torch.rand(2, 3, 6, 5, generator=gen)
        ref = _mse_oracle(a, b)
        assert abs(mse(a, b) - ref) <= 1e-10
        assert abs(psnr(a, b) - 10.0 * math.log10(1.0 / ref)) <= 1e-10


def test_psnr_sentinel_and_constant_offset():
    x = torch.rand(1, 4, 4)
    assert mse(x, x) == 0.0
    assert math.isinf(psnr(x, x)) and psnr(x, x) > 0
    a = torch.zeros(4, 4, dtype=torch.float64)
    b = torch.full((4, 4), 0.1, dtype=torch.float64)
    assert abs(mse(a, b) - 0.01) <= 1e-12
    assert abs(psnr(a, b) - 20.0) <= 1e-9
    assert abs(psnr(a, b, peak=0.1) - 0.0) <= 1e-9
    with pytest.raises(MetricError):
        psnr(a, b, peak=0.0)
    with pytest.raises(MetricError):
        mse(a, torch.zeros(3, 3, dtype=torch.float64))


# ---- ssim -------------------------------------------------------------------


def test_ssim_matches_flat_oracle():
    gen = torch.Generator().manual_seed(1)
    a = torch.rand(2, 3, 10, 11, generator=gen)
    b = (a + 0.1 * torch.randn(2, 3, 10, 11, generator=gen)).clamp(0, 1)
    assert abs(ssim(a, b) - _ssim_oracle(a, b)) <= 1e-10


def test_ssim_identity_symmetry_and_contrast():
    gen = torch.Generator().manual_seed(2)
    a = torch.rand(1, 1, 12, 12, generator=gen)
    b = torch.rand(1, 1, 12, 12, generator=gen)
    assert abs(ssim(a, a) - 1.0) <= 1e-12
    assert ssim(a, b) == ssim(b, a)
    zero = torch.zeros(1, 1, 9, 9)
    one = torch.ones(1, 1, 9, 9)
    assert ssim(zero, one) < 0.05
    assert ssim(a[0, 0], b[0, 0]) == ssim(a, b)  # 2d input promotes to 4d
    with pytest.raises(MetricError):
        ssim(torch.rand(1, 1, 4, 4), torch.rand(1, 1, 4, 4))  # window > image
    with pytest.raises(MetricError):
        ssim(a, torch.rand(1, 1, 12, 13, generator=gen))
    with pytest.raises(MetricError):
        ssim(torch.rand(1, 1, 1, 9, 9), torch.rand(1, 1, 1, 9, 9))


# ---- fid --------------------------------------------------------------------


def test_fid_identity_and_nonnegative():
    gen = torch.Generator().manual_seed(3)
    feats = torch.randn(32, 6, generator=gen)
    assert fid(feats, feats) <= 1e-6
    other = torch.randn(32, 6, generator=gen) + 0.5
    assert fid(feats, other) >= 0.0


def test_fid_mean_shift_closed_form():
    rng = np.random.default_rng(4)
    feats = rng.normal(size=(64, 8))
    for scale in (0.1, 1.0, 3.0):
        delta = rng.normal(size=8) * scale
        got = fid(feats, feats + delta)
        assert abs(got - float(delta @ delta)) <= 1e-4


def test_fid_matches_eigenvalue_oracle():
    rng = np.random.default_rng(5)
    fa = rng.normal(size=(48, 6))
    fb = rng.normal(loc=0.3, scale=1.4, size=(40, 6))
    assert abs(fid(fa, fb) - _fid_oracle(fa, fb)) <= 1e-4


def test_fid_permutation_invariance_and_validation():
    rng = np.random.default_rng(6)
    fa = rng.normal(size=(20, 5))
    fb = rng.normal(size=(24, 5))
    perm = rng.permutation(20)
    assert abs(fid(fa, fb) - fid(fa[perm], fb)) <= 1e-10
    assert fid(fa, fb) == fid(fa, fb)  # deterministic
    with pytest.raises(MetricError):
        fid(fa[:1], fb)
    with pytest.raises(MetricError):
        fid(fa, rng.normal(size=(24, 4)))
    with pytest.raises(MetricError):
        fid(fa.ravel(), fb)


# ---- lpips ------------------------------------------------------------------


def test_lpips_identity_symmetry_and_strict():
    net = lambda x: [x, 2.0 * x.mean(dim=(2, 3), keepdim=True).expand_as(x)]
    gen = torch.Generator().manual_seed(7)
    a = torch.rand(1, 3, 8, 8, generator=gen)
    b = torch.rand(1, 3, 8, 8, generator=gen)
    assert lpips(a, a, perceptual_net=net) == 0.0
    assert abs(lpips(a, b, perceptual_net=net) - lpips(b, a, perceptual_net=net)) <= 1e-10
    with pytest.raises(MetricError):
        lpips(a, b, perceptual_net=None, strict=True)
    with pytest.raises(MetricError):
        lpips(a, torch.rand(1, 3, 8, 9, generator=gen), perceptual_net=net)


def test_lpips_unit_normalization_scale_invariance():
    net = lambda x: [x]
    gen = torch.Generator().manual_seed(8)
    a = torch.rand(1, 3, 6, 6, generator=gen) + 0.1
    b = torch.rand(1, 3, 6, 6, generator=gen) + 0.1
    base = lpips(a, b, perceptual_net=net)
    # channel-norm removes a global positive scale applied to the features
    assert abs(base - lpips(a, b, perceptual_net=lambda x: [2.0 * t for t in [x]])) <= 1e-7
    assert abs(base - lpips(3.0 * a, b, perceptual_net=net)) <= 1e-7
    shifted = lpips(a + 0.5, b, perceptual_net=net)
    assert abs(shifted - base) > 1e-4  # an additive shift is not a scale


def test_lpips_default_net_orders_noise_levels():
    gen = torch.Generator().manual_seed(9)
    wins = 0
    trials = 30
    for k in range(trials):
        base = torch.rand(1, 3, 32, 32, generator=gen)
        vals = []
        for sigma in (0.05, 0.1, 0.2):
            noisy = (base + sigma * torch.randn(1, 3, 32, 32, generator=gen)).clamp(0, 1)
            vals.append(lpips(base, noisy))
        if vals[0] < vals[1] < vals[2]:
            wins += 1
    assert wins >= int(0.9 * trials)
    assert lpips(torch.rand(1, 1, 32, 32, generator=gen), torch.rand(1, 1, 32, 32, generator=gen)) > 0


# ---- report and records -----------------------------------------------------


def test_metric_report_sentinel_consistency():
    ok = MetricReport(psnr=float("inf"), ssim=1.0, mse=0.0, lpips=0.0, fid=0.0,
                      sample_counts={"generated": 2, "reference": 2})
    assert ok.to_dict()["psnr"] is None
    finite = MetricReport(psnr=20.0, ssim=0.9, mse=0.01, lpips=0.1, fid=1.0,
                          sample_counts={})
    assert finite.to_dict()["psnr"] == 20.0
    with pytest.raises(MetricError):
        MetricReport(psnr=20.0, ssim=1.0, mse=0.0, lpips=0.0, fid=0.0, sample_counts={})
    with pytest.raises(MetricError):
        MetricReport(psnr=float("inf"), ssim=1.0, mse=0.01, lpips=0.0, fid=0.0, sample_counts={})


def test_evaluate_pair_self_comparison():
    gen = torch.Generator().manual_seed(10)
    batch = torch.rand(4, 1, 16, 16, generator=gen)
    report = evaluate_pair(batch, batch.clone())
    assert math.isinf(report.psnr) and report.mse == 0.0
    assert abs(report.ssim - 1.0) <= 1e-12
    assert report.lpips == 0.0
    assert report.fid <= 1e-6
    assert report.sample_counts == {"generated": 4, "reference": 4}
    feats = default_fid_features(batch)
    assert feats.shape[0] == 4 and feats.dim() == 2
    with pytest.raises(MetricError):
        evaluate_pair(batch, batch[:2])


def test_write_metric_records_appends_jsonl(tmp_path):
    path = tmp_path / "metrics.jsonl"
    report = MetricReport(psnr=18.0, ssim=0.8, mse=0.02, lpips=0.2, fid=3.0,
                          sample_counts={"generated": 1, "reference": 1})
    write_metric_records(path, report, model_version="m1", dataset_hash="d1")
    write_metric_records(path, report, model_version="m2", dataset_hash="d2")
    lines = path.read_text().strip().splitlines()
    assert len(lines) == 2
    first, second = (json.loads(ln) for ln in lines)
    assert first["model_version"] == "m1" and second["dataset_hash"] == "d2"
    assert first["metrics"]["psnr"] == 18.0 and "created_at" in first
