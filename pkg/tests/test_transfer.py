"""Conditioning blocks, the coloring denoiser, and deterministic transfer runs."""

import time

import pytest
import torch

from fdutil import check_gradients
from haigen.diffusion import default_schedule, make_schedule
from haigen.images import content_hash, to_png_bytes
from haigen.transfer.ccam import CCAM
from haigen.transfer.embeddings import (
    StyleEncoder,
    StyleEmbedding,
    TimeEmbedding,
    TimestepEmbedding,
    TransferError,
    style_encode,
    time_embed,
)
from haigen.transfer.model import STMConfig, STMDenoiser
from haigen.transfer.sampling import ALLOWED_STEPS, TransferRecord, transfer
from haigen.transfer.training import STMBatch, STMTrainer, stm_train_step

SMALL = STMConfig(base_channels=8, channel_mults=(1, 2), ccam_levels=(1,),
                  time_dim=32, style_dim=16, norm_groups=4, seed=0)


def _small_stack(seed: int = 0):
    torch.manual_seed(seed)
    model = STMDenoiser(SMALL)
    encoder = StyleEncoder(style_dim=SMALL.style_dim, base=8, seed=1)
    schedule = make_schedule(200, alpha_end=0.05)
    return model, encoder, schedule


# ---- ccam -------------------------------------------------------------------


def test_fresh_ccam_is_exact_passthrough():
    torch.manual_seed(0)
    ccam = CCAM(channels=8, e_dim=16)
    f = torch.randn(2, 8, 6, 6)
    e = torch.randn(2, 16)
    assert torch.equal(ccam(f, e), f)
    assert torch.equal(ccam(f, torch.randn(16)), f)  # 1d condition broadcasts
    with torch.no_grad():
        ccam.add_proj.bias.fill_(0.1)
    assert not torch.equal(ccam(f, e), f)


def test_ccam_validation():
    ccam = CCAM(channels=8, e_dim=16)
    with pytest.raises(TransferError):
        ccam(torch.randn(2, 4, 6, 6), torch.randn(2, 16))
    with pytest.raises(TransferError):
        ccam(torch.randn(2, 8, 6, 6), torch.randn(2, 12))
    with pytest.raises(TransferError):
        ccam(torch.randn(8, 6, 6), torch.randn(16))


def test_ccam_gradients_match_finite_differences():
    torch.manual_seed(1)
    ccam = CCAM(channels=4, e_dim=6)
    with torch.no_grad():
        for p in ccam.parameters():
            p.normal_(std=0.3)
    f = torch.randn(1, 4, 4, 4).requires_grad_(True)
    e = torch.randn(1, 6).requires_grad_(True)
    check_gradients(lambda: ccam(f, e), [f, e], h=(1e-2, 3e-3, 1e-3), tol=1e-3)


# ---- embeddings -------------------------------------------------------------


def test_timestep_embedding_contract():
    emb_a = TimestepEmbedding(dim=32, seed=0)
    emb_b = TimestepEmbedding(dim=32, seed=0)
    t = torch.tensor([1, 5, 9])
    assert torch.equal(emb_a(t), emb_b(t))
    e1 = time_embed(1, 10, emb_a)
    e5 = time_embed(5, 10, emb_a)
    assert e1.e_t.shape == (32,)
    assert not torch.equal(e1.e_t, e5.e_t)
    with pytest.raises(TransferError):
        time_embed(0, 10, emb_a)
    with pytest.raises(TransferError):
        time_embed(11, 10, emb_a)
    with pytest.raises(TransferError):
        TimeEmbedding(e_t=torch.zeros(2, 2))
    with pytest.raises(TransferError):
        StyleEmbedding(s=torch.tensor([float("inf")]))


def test_style_encoder_contract():
    enc = StyleEncoder(style_dim=16, base=8, seed=1)
    image = torch.rand(2, 3, 16, 16, generator=torch.Generator().manual_seed(2))
    out = enc(image)
    assert out.shape == (2, 16)
    assert torch.allclose(enc(image[0]), out[:1], atol=1e-6)  # 3d promotes
    with pytest.raises(TransferError):
        enc(torch.rand(2, 1, 16, 16))
    emb = style_encode(image[:1], enc)
    assert emb.s.shape == (16,) and torch.equal(emb.s, enc(image[:1])[0])


# ---- denoiser ---------------------------------------------------------------


def test_stm_config_validation():
    with pytest.raises(ValueError):
        STMConfig(channel_mults=(1, 2), ccam_levels=(2,))
    with pytest.raises(ValueError):
        STMConfig(ccam_order=("time", "time"))


def test_ccam_sites_share_base_weights_across_placements():
    bare = STMDenoiser(STMConfig(base_channels=8, channel_mults=(1, 2), ccam_levels=(),
                                 time_dim=32, style_dim=16, norm_groups=4, seed=0))
    full = STMDenoiser(SMALL)
    bare_state = dict(bare.named_parameters())
    for name, param in full.named_parameters():
        if not name.startswith("ccams."):
            assert torch.equal(param, bare_state[name]), name
    gen = torch.Generator().manual_seed(3)
    x = torch.randn(1, 3, 16, 16, generator=gen)
    sketch = torch.rand(1, 1, 16, 16, generator=gen)
    style = torch.randn(1, 16, generator=gen)
    # fresh CCAMs are passthroughs, so inserting them changes nothing
    assert torch.equal(full(x, 3, sketch, style), bare(x, 3, sketch, style))


def test_stm_forward_validation_and_broadcasts():
    model, encoder, _ = _small_stack()
    gen = torch.Generator().manual_seed(4)
    x = torch.randn(2, 3, 16, 16, generator=gen)
    sketch = torch.rand(1, 1, 16, 16, generator=gen)
    style = torch.randn(16, generator=gen)
    out = model(x, 5, sketch, style)
    assert out.shape == x.shape
    explicit = model(x, 5, sketch.expand(2, -1, -1, -1), style[None].expand(2, -1))
    assert torch.equal(out, explicit)
    assert torch.equal(model(x, 5, sketch[0], style), out)  # 3d sketch promotes
    with pytest.raises(TransferError):
        model(torch.randn(2, 1, 16, 16), 5, sketch, style)
    with pytest.raises(TransferError, match="resample the sketch"):
        model(x, 5, torch.rand(1, 1, 8, 8), style)


def test_stm_sketch_conditions_but_fresh_style_does_not():
    model, _, _ = _small_stack()
    gen = torch.Generator().manual_seed(5)
    x = torch.randn(1, 3, 16, 16, generator=gen)
    sketch_a = torch.rand(1, 1, 16, 16, generator=gen)
    sketch_b = torch.rand(1, 1, 16, 16, generator=gen)
    style_a = torch.randn(1, 16, generator=gen)
    style_b = torch.randn(1, 16, generator=gen)
    assert not torch.equal(model(x, 3, sketch_a, style_a), model(x, 3, sketch_b, style_a))
    # zero-initialized gates keep the implicit condition silent until trained
    assert torch.equal(model(x, 3, sketch_a, style_a), model(x, 3, sketch_a, style_b))
    with torch.no_grad():
        for p in model.ccams.parameters():
            p.normal_(std=0.2)
    assert not torch.equal(model(x, 3, sketch_a, style_a), model(x, 3, sketch_a, style_b))


def test_stm_gradients_match_finite_differences():
    model, _, _ = _small_stack()
    with torch.no_grad():
        for p in model.ccams.parameters():
            p.normal_(std=0.1)
    model.eval()
    gen = torch.Generator().manual_seed(6)
    x = torch.randn(1, 3, 4, 4, generator=gen).requires_grad_(True)
    sketch = torch.rand(1, 1, 4, 4, generator=gen)
    style = torch.randn(1, 16, generator=gen)
    check_gradients(lambda: model(x, 2, sketch, style), [x], h=(1e-2, 3e-3, 1e-3), tol=1e-2)


# ---- transfer runs ----------------------------------------------------------


def test_transfer_contract_and_determinism():
    model, encoder, schedule = _small_stack()
    gen = torch.Generator().manual_seed(7)
    sketch = torch.rand(1, 1, 16, 16, generator=gen)
    reference = torch.rand(3, 16, 16, generator=gen)
    out_a, rec_a = transfer(sketch, reference, steps=20, seed=11, model=model,
                            schedule=schedule, style_encoder=encoder)
    out_b, rec_b = transfer(sketch, reference, steps=20, seed=11, model=model,
                            schedule=schedule, style_encoder=encoder)
    out_c, _ = transfer(sketch, reference, steps=20, seed=12, model=model,
                        schedule=schedule, style_encoder=encoder)
    assert torch.equal(out_a, out_b)
    assert not torch.equal(out_a, out_c)
    assert out_a.shape == (3, 16, 16)
    assert float(out_a.min()) >= 0.0 and float(out_a.max()) <= 1.0
    assert rec_a == rec_b
    assert rec_a.model_version == "stm-v1" and rec_a.steps == 20 and rec_a.seed == 11
    assert rec_a.sketch_hash == content_hash(to_png_bytes(sketch[0]))
    assert rec_a.reference_hash == content_hash(to_png_bytes(reference))
    assert rec_a.to_dict()["sketch_hash"] == rec_a.sketch_hash


def test_transfer_validation():
    model, encoder, schedule = _small_stack()
    sketch = torch.rand(1, 1, 16, 16)
    reference = torch.rand(3, 16, 16)
    with pytest.raises(TransferError):
        transfer(sketch, reference, steps=30, seed=0, model=model,
                 schedule=schedule, style_encoder=encoder)
    with pytest.raises(TransferError):
        transfer(sketch, reference, steps=20, seed=0, model=None,
                 schedule=schedule, style_encoder=encoder)
    with pytest.raises(TransferError):
        transfer(torch.rand(2, 1, 16, 16), reference, steps=20, seed=0, model=model,
                 schedule=schedule, style_encoder=encoder)


def test_transfer_mode_restored_and_steps_all_run():
    model, encoder, _ = _small_stack()
    schedule = default_schedule(1000)
    sketch = torch.rand(1, 1, 16, 16, generator=torch.Generator().manual_seed(8))
    reference = torch.rand(3, 16, 16, generator=torch.Generator().manual_seed(9))
    model.train()
    for steps in ALLOWED_STEPS[:2]:
        out, rec = transfer(sketch, reference, steps=steps, seed=1, model=model,
                            schedule=schedule, style_encoder=encoder)
        assert torch.isfinite(out).all() and rec.steps == steps
    assert model.training


def test_transfer_wall_time_tracks_step_count():
    model, encoder, _ = _small_stack()
    schedule = default_schedule(1000)
    sketch = torch.rand(1, 1, 16, 16, generator=torch.Generator().manual_seed(10))
    reference = torch.rand(3, 16, 16, generator=torch.Generator().manual_seed(11))
    transfer(sketch, reference, steps=20, seed=0, model=model,
             schedule=schedule, style_encoder=encoder)  # warm up
    t0 = time.perf_counter()
    transfer(sketch, reference, steps=20, seed=0, model=model,
             schedule=schedule, style_encoder=encoder)
    t20 = time.perf_counter() - t0
    t0 = time.perf_counter()
    transfer(sketch, reference, steps=200, seed=0, model=model,
             schedule=schedule, style_encoder=encoder)
    t200 = time.perf_counter() - t0
    assert 5.0 <= t200 / t20 <= 15.0


# ---- training ---------------------------------------------------------------


def test_stm_batch_validation():
    with pytest.raises(TransferError):
        STMBatch(sketch=torch.rand(1, 16, 16), target=torch.rand(1, 3, 16, 16))
    with pytest.raises(TransferError):
        STMBatch(sketch=torch.rand(2, 1, 16, 16), target=torch.rand(1, 3, 16, 16))
    with pytest.raises(TransferError, match="resampled"):
        STMBatch(sketch=torch.rand(1, 1, 8, 8), target=torch.rand(1, 3, 16, 16))


def test_stm_trainer_smoke_and_param_groups():
    model, encoder, schedule = _small_stack()
    trainer = STMTrainer(model, encoder, schedule, lr=1e-3, batch_size=2, seed=0,
                         conditioning_lr_mult=2.0)
    groups = trainer.optimizer.param_groups
    assert groups[0]["lr"] == 1e-3 and groups[1]["lr"] == 2e-3
    n_cond = sum(p.numel() for p in groups[1]["params"])
    n_ccam = sum(p.numel() for n, p in model.named_parameters() if n.startswith("ccams."))
    n_style = sum(p.numel() for p in encoder.parameters())
    assert n_cond == n_ccam + n_style
    gen = torch.Generator().manual_seed(12)
    sketches = torch.rand(4, 1, 16, 16, generator=gen)
    targets = torch.rand(4, 3, 16, 16, generator=gen)
    history = trainer.train(sketches, targets, 3)
    assert len(history) == 3 and all(v == v and v < 1e3 for v in history)
    solo = stm_train_step(STMBatch(sketch=sketches[:2], target=targets[:2],
                                   reference=targets[2:4]), model, schedule, encoder)
    assert solo == solo
