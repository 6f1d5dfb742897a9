"""Style normalization, spectral blocks, the sketch decoder, and library builds."""

import json

import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st
from torch.nn import functional as F

from fdutil import check_gradients
from haigen.images import content_hash, load_png
from haigen.sketch.apsn import (
    APSN_EPS,
    DesignerStyleStats,
    apsn,
    compute_style_stats,
    load_style_stats,
    save_style_stats,
)
from haigen.sketch.blocks import DSMFF, SpectralNormConv2d, conv_operator_norm
from haigen.sketch.encoder import (
    EncoderConfig,
    MultiLevelFeatures,
    SketchEncoder,
    SketchError,
    as_rgb,
)
from haigen.sketch.library import build_library, read_manifest
from haigen.sketch.losses import (
    LossWeights,
    PatchDiscriminator,
    discriminator_loss,
    gram_matrix,
    i2s_loss,
    i2s_total,
)
from haigen.sketch.model import SketchGenerator, SketchGeneratorConfig, generate_sketch
from haigen.sketch.training import I2SMTrainConfig, I2SMTrainer
from haigen.synth import make_designer_corpus, make_shape_pairs

TINY_ENCODER = EncoderConfig(channels=(4, 8, 8, 8), convs_per_block=(1, 1, 1, 1),
                             semantic_dim=8, seed=0)
TINY_GENERATOR = SketchGeneratorConfig(decoder_width=8, encoder=TINY_ENCODER, seed=0)


# ---- adaptive style normalization -------------------------------------------


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**16), shift=st.floats(-2.0, 2.0), scale=st.floats(0.5, 3.0))
def test_apsn_imposes_target_statistics(seed, shift, scale):
    gen = torch.Generator().manual_seed(seed)
    x = torch.randn(2, 3, 6, 6, generator=gen) * scale + shift
    mu_s = torch.randn(3, generator=gen)
    sigma_s = torch.rand(3, generator=gen) + 0.2
    out = apsn(x, mu_s, sigma_s)
    got_mu = out.mean(dim=(2, 3))
    got_sigma = out.std(dim=(2, 3), unbiased=False)
    assert float((got_mu - mu_s).abs().max()) <= 1e-4
    assert float((got_sigma - sigma_s).abs().max()) <= 1e-3


def test_apsn_epsilon_is_honored():
    gen = torch.Generator().manual_seed(0)
    x = torch.randn(1, 2, 4, 4, generator=gen)
    mu_s = torch.tensor([0.3, -0.1])
    sigma_s = torch.tensor([1.2, 0.4])
    mu = x.mean(dim=(2, 3), keepdim=True)
    sigma = x.std(dim=(2, 3), keepdim=True, unbiased=False)
    manual = sigma_s[None, :, None, None] * (x - mu) / (sigma + 0.5) + mu_s[None, :, None, None]
    assert torch.equal(apsn(x, mu_s, sigma_s, eps=0.5), manual)
    assert torch.equal(apsn(x, mu_s, sigma_s), apsn(x, mu_s, sigma_s, eps=APSN_EPS))


def test_apsn_constant_input_returns_target_mean():
    mu_s = torch.tensor([0.25, -1.5, 0.0])
    sigma_s = torch.tensor([1.0, 2.0, 0.5])
    # dyadic fill values sum exactly, so x - mean(x) is exactly zero
    for value in (0.0, 0.5, -0.375, 1.25, 2.0):
        x = torch.full((2, 3, 5, 5), value)
        out = apsn(x, mu_s, sigma_s)
        assert torch.equal(out, mu_s[None, :, None, None].expand_as(x))


def test_apsn_affine_input_invariance():
    gen = torch.Generator().manual_seed(1)
    x = torch.randn(1, 3, 8, 8, generator=gen)
    mu_s = torch.randn(3, generator=gen)
    sigma_s = torch.rand(3, generator=gen) + 0.5
    base = apsn(x, mu_s, sigma_s)
    shifted = apsn(1.7 * x - 0.3, mu_s, sigma_s)
    assert float((base - shifted).abs().max()) <= 1e-3


def test_apsn_validation():
    with pytest.raises(SketchError):
        apsn(torch.zeros(2, 3, 4), torch.zeros(3), torch.ones(3))
    with pytest.raises(SketchError):
        apsn(torch.zeros(1, 3, 4, 4), torch.zeros(2), torch.ones(3))


def test_apsn_gradients_match_finite_differences():
    gen = torch.Generator().manual_seed(2)
    x = (torch.randn(2, 3, 4, 4, generator=gen)).requires_grad_(True)
    mu_s = torch.randn(3, generator=gen).requires_grad_(True)
    sigma_s = (torch.rand(3, generator=gen) + 0.5).requires_grad_(True)
    check_gradients(lambda: apsn(x, mu_s, sigma_s), [x, mu_s, sigma_s], h=1e-2, tol=1e-3)


# ---- designer statistics ----------------------------------------------------


def test_style_stats_validation():
    vec = torch.ones(4)
    with pytest.raises(SketchError):
        DesignerStyleStats("d", 1, (vec,) * 3, (vec,) * 3)
    with pytest.raises(SketchError):
        DesignerStyleStats("d", 1, (vec,) * 4, (torch.full((4,), -1.0),) + (vec,) * 3)
    with pytest.raises(SketchError):
        DesignerStyleStats("d", 0, (vec,) * 4, (vec,) * 4)
    with pytest.raises(SketchError):
        DesignerStyleStats("d", 1, (torch.ones(4, 1),) * 4, (torch.ones(4, 1),) * 4)
    stats = DesignerStyleStats("d", 3, (vec,) * 4, (vec,) * 4)
    assert stats.level(1) == (vec, vec)
    with pytest.raises(SketchError):
        stats.level(5)


def test_compute_style_stats_batch_invariant():
    corpus = make_designer_corpus(6, 32, seed=3)
    encoder = SketchEncoder(TINY_ENCODER)
    whole = compute_style_stats(corpus, encoder, designer_id="d", batch_size=8)
    chunked = compute_style_stats(corpus, encoder, designer_id="d", batch_size=1)
    for n in range(1, 5):
        assert torch.allclose(whole.mu_s[n - 1], chunked.mu_s[n - 1], atol=1e-9)
        assert torch.allclose(whole.sigma_s[n - 1], chunked.sigma_s[n - 1], atol=1e-9)
    as_list = compute_style_stats(list(corpus), encoder, designer_id="d")
    assert torch.equal(as_list.mu_s[0], whole.mu_s[0])
    assert whole.corpus_size == 6 and whole.designer_id == "d"
    # duplicating the corpus leaves population statistics unchanged
    doubled = compute_style_stats(torch.cat([corpus, corpus]), encoder, designer_id="d")
    assert torch.allclose(doubled.mu_s[2], whole.mu_s[2], atol=1e-6)
    assert torch.allclose(doubled.sigma_s[2], whole.sigma_s[2], atol=1e-6)
    with pytest.raises(SketchError):
        compute_style_stats(torch.zeros(0, 1, 32, 32), encoder)


def test_style_stats_save_load_roundtrip(tmp_path):
    corpus = make_designer_corpus(3, 32, seed=4)
    encoder = SketchEncoder(TINY_ENCODER)
    stats = compute_style_stats(corpus, encoder, designer_id="alice")
    other = compute_style_stats(corpus * 0.5, encoder, designer_id="bob")
    path = tmp_path / "stats.npz"
    save_style_stats(path, [stats, other])
    loaded = load_style_stats(path)
    assert set(loaded) == {"alice", "bob"}
    for n in range(4):
        assert torch.equal(loaded["alice"].mu_s[n], stats.mu_s[n])
        assert torch.equal(loaded["bob"].sigma_s[n], other.sigma_s[n])
    assert loaded["alice"].corpus_size == 3


# ---- spectral blocks --------------------------------------------------------


def test_conv_operator_norm_matches_dense_svd():
    gen = torch.Generator().manual_seed(5)
    weight = torch.randn(3, 2, 3, 3, generator=gen)
    size = (4, 4)
    cols = []
    for j in range(2 * size[0] * size[1]):
        e = torch.zeros(1, 2, *size)
        e.reshape(-1)[j] = 1.0
        cols.append(F.conv2d(e, weight, padding=1).reshape(-1))
    dense = torch.stack(cols, dim=1)
    expected = float(torch.linalg.svdvals(dense.double())[0])
    got = conv_operator_norm(weight, size, iters=400)
    assert abs(got - expected) <= 1e-3 * expected


def test_spectral_norm_conv_bounds_operator_norm():
    torch.manual_seed(6)
    sn = SpectralNormConv2d(2, 3).eval()
    x = torch.randn(1, 2, 8, 8)
    y = sn(x)  # first eval call warm-starts the per-size singular vectors
    assert y.shape == (1, 3, 8, 8)
    assert torch.equal(sn(x), y)  # deterministic once warmed
    sigma = float(sn._sigma((8, 8)).detach())
    eff = (sn.weight / sigma).detach()
    assert abs(conv_operator_norm(eff, (8, 8), iters=400) - 1.0) <= 0.02
    with pytest.raises(SketchError):
        sn(torch.randn(1, 3, 8, 8))


def test_dsmff_shapes_and_validation():
    torch.manual_seed(7)
    block = DSMFF(4).eval()
    f_e = torch.randn(2, 4, 8, 8)
    f_d = torch.randn(2, 4, 4, 4)
    out = block(f_e, f_d)
    assert out.shape == (2, 4, 8, 8)
    with pytest.raises(SketchError):
        block(f_e, torch.randn(2, 4, 3, 3))
    with pytest.raises(SketchError):
        block(torch.randn(2, 5, 8, 8), f_d)
    with pytest.raises(SketchError):
        block(f_e[0], f_d)


def test_dsmff_gamma_gates_the_encoder_path():
    torch.manual_seed(8)
    block = DSMFF(4).eval()
    f_e = torch.randn(1, 4, 8, 8)
    f_d = torch.randn(1, 4, 4, 4)
    _ = block(f_e, f_d)
    base = block(f_e, f_d)
    with torch.no_grad():
        block.gamma.fill_(3.0)
    assert not torch.equal(block(f_e, f_d), base)


def test_dsmff_gradients_match_finite_differences():
    torch.manual_seed(9)
    block = DSMFF(4).eval()
    f_e = torch.randn(1, 4, 4, 4)
    f_d = torch.randn(1, 4, 2, 2)
    block(f_e, f_d)  # warm the spectral-norm caches so eval is deterministic
    f_e.requires_grad_(True)
    f_d.requires_grad_(True)
    check_gradients(lambda: block(f_e, f_d), [f_e, f_d], h=(1e-2, 3e-3, 1e-3), tol=1e-3)


# ---- encoder features -------------------------------------------------------


def test_multilevel_features_validation():
    maps = [torch.zeros(1, 2, 16 // 2**i, 16 // 2**i) for i in range(4)]
    MultiLevelFeatures(*maps, torch.zeros(1, 8))
    with pytest.raises(SketchError):
        MultiLevelFeatures(*maps, torch.zeros(8))
    bad = list(maps)
    bad[2] = torch.zeros(1, 2, 5, 5)
    with pytest.raises(SketchError):
        MultiLevelFeatures(*bad, torch.zeros(1, 8))
    with pytest.raises(SketchError):
        MultiLevelFeatures(maps[0][0], *maps[1:], torch.zeros(1, 8))


def test_encoder_taps_and_frozen():
    enc = SketchEncoder(TINY_ENCODER)
    assert all(not p.requires_grad for p in enc.parameters())
    feats = enc(torch.rand(2, 3, 32, 32))
    assert [f.shape for f in feats.levels()] == [
        torch.Size((2, c, 32 // 2**i, 32 // 2**i)) for i, c in enumerate(TINY_ENCODER.channels)
    ]
    assert feats.f_e5.shape == (2, TINY_ENCODER.semantic_dim)
    with pytest.raises(SketchError):
        enc(torch.rand(2, 2, 32, 32))
    assert as_rgb(torch.rand(2, 1, 8, 8)).shape == (2, 3, 8, 8)
    with pytest.raises(SketchError):
        feats.level(0)


# ---- losses -----------------------------------------------------------------


def test_gram_matrix_matches_flat_loop():
    gen = torch.Generator().manual_seed(10)
    f = torch.randn(2, 3, 4, 4, generator=gen)
    got = gram_matrix(f)
    B, C, H, W = f.shape
    vals = f.double()
    for b in range(B):
        for i in range(C):
            for j in range(C):
                acc = 0.0
                for h in range(H):
                    for w in range(W):
                        acc += float(vals[b, i, h, w]) * float(vals[b, j, h, w])
                assert abs(float(got[b, i, j]) - acc / (C * H * W)) <= 1e-6
    with pytest.raises(SketchError):
        gram_matrix(f[0])


def test_i2s_total_is_exact_bookkeeping():
    gen = torch.Generator().manual_seed(11)
    sketches = torch.rand(2, 1, 32, 32, generator=gen)
    refs = torch.rand(2, 1, 32, 32, generator=gen)
    encoder = SketchEncoder(TINY_ENCODER)
    disc = PatchDiscriminator(base=4)
    total, components = i2s_loss(sketches, refs, encoder, disc)
    floats = {k: float(v.detach()) for k, v in components.items()}
    assert abs(float(total.detach()) - i2s_total(floats)) <= 1e-12
    custom = LossWeights(gram=2.0, g=0.25, cos=3.0, clip=0.0)
    total_c, comps_c = i2s_loss(sketches, refs, encoder, disc, weights=custom)
    floats_c = {k: float(v.detach()) for k, v in comps_c.items()}
    assert abs(float(total_c.detach()) - i2s_total(floats_c, custom)) <= 1e-12
    assert set(components) == {"gram", "g", "cos", "clip"}
    ident_total, ident = i2s_loss(sketches, sketches, encoder, disc)
    assert float(ident["gram"].detach()) == 0.0 and float(ident["cos"].detach()) <= 1e-6
    with pytest.raises(SketchError):
        i2s_loss(sketches, refs[:1], encoder, disc)


def test_i2s_loss_global_encoder_slot():
    gen = torch.Generator().manual_seed(12)
    sketches = torch.rand(2, 1, 32, 32, generator=gen)
    refs = torch.rand(2, 1, 32, 32, generator=gen)
    encoder = SketchEncoder(TINY_ENCODER)
    disc = PatchDiscriminator(base=4)
    pool = lambda x: x.mean(dim=(2, 3))
    _, comps = i2s_loss(sketches, refs, encoder, disc, global_encoder=pool)
    manual = F.mse_loss(pool(as_rgb(sketches)), pool(as_rgb(refs)))
    assert torch.allclose(comps["clip"], manual)


def test_discriminator_loss_and_validation():
    torch.manual_seed(13)
    disc = PatchDiscriminator(base=4)
    real = torch.rand(2, 1, 32, 32)
    fake = torch.rand(2, 1, 32, 32)
    loss = discriminator_loss(disc, real, fake)
    d_real, d_fake = disc(real), disc(fake)
    manual = F.binary_cross_entropy_with_logits(d_real, torch.ones_like(d_real)) + \
        F.binary_cross_entropy_with_logits(d_fake, torch.zeros_like(d_fake))
    assert torch.allclose(loss, manual)
    with pytest.raises(SketchError):
        disc(torch.rand(2, 3, 32, 32))


# ---- decoder ----------------------------------------------------------------


def test_decoder_trace_matches_block_recursion():
    torch.manual_seed(14)
    model = SketchGenerator(TINY_GENERATOR).eval()
    corpus = make_designer_corpus(3, 32, seed=3)
    stats = compute_style_stats(corpus, model.encoder, designer_id="d")
    image = torch.rand(1, 3, 32, 32, generator=torch.Generator().manual_seed(15))
    with torch.no_grad():
        model(image, stats)  # warm spectral-norm caches at every level size
        state = model(image, stats, return_state=True)
        feats = model.encoder(image)
        normed = [model.proj[n - 1](apsn(feats.level(n), *stats.level(n))) for n in range(1, 5)]
        assert torch.equal(state.f_d[3], normed[3])
        f_d = normed[3]
        for n in (3, 2, 1):
            f_d = model.blocks[str(n)](normed[n - 1], f_d)
            assert torch.equal(state.f_d[n - 1], f_d)
        assert torch.equal(state.output, torch.sigmoid(model.head(f_d)))
    # each fused level doubles the spatial resolution back to the input size
    assert [state.f_d[n].shape[-1] for n in (3, 2, 1, 0)] == [4, 8, 16, 32]
    assert set(state.gamma) == {3, 2, 1}
    with pytest.raises(SketchError):
        model(image, None)


def test_generate_sketch_deterministic_and_mode_safe():
    torch.manual_seed(16)
    model = SketchGenerator(TINY_GENERATOR)
    corpus = make_designer_corpus(3, 32, seed=3)
    stats = compute_style_stats(corpus, model.encoder, designer_id="d")
    image = torch.rand(2, 3, 32, 32, generator=torch.Generator().manual_seed(17))
    model.train()
    first = generate_sketch(image, stats, model)
    assert model.training  # restored
    second = generate_sketch(image, stats, model)
    assert torch.equal(first, second)
    assert first.shape == (2, 1, 32, 32)
    assert float(first.min()) >= 0.0 and float(first.max()) <= 1.0


# ---- library builds ---------------------------------------------------------


def test_build_library_resumable_manifest(tmp_path):
    torch.manual_seed(18)
    model = SketchGenerator(TINY_GENERATOR)
    images, _ = make_shape_pairs(4, 32, seed=19)
    corpus = make_designer_corpus(3, 32, seed=3)
    stats = compute_style_stats(corpus, model.encoder, designer_id="d")
    out_dir = tmp_path / "library"
    report = build_library(list(images), stats, model, out_dir)
    assert report.generated == 4 and report.skipped == 0
    manifest = read_manifest(out_dir)
    assert len(manifest) == 4
    for entry in manifest.values():
        png = out_dir / entry["path"]
        assert png.exists()
        assert content_hash(png.read_bytes()) == entry["content_hash"]
        assert entry["designer_id"] == "d"
        assert load_png(png, channels=1).shape == (1, 32, 32)
    again = build_library(list(images), stats, model, out_dir)
    assert again.generated == 0 and again.skipped == 4
    assert len(read_manifest(out_dir)) == 4
    more, _ = make_shape_pairs(6, 32, seed=19)
    third = build_library(list(more), stats, model, out_dir)
    assert third.generated == 2 and third.skipped == 4
    with pytest.raises(ValueError):
        build_library([images[:2]], stats, model, out_dir)


# ---- trainer smoke ----------------------------------------------------------


def test_i2sm_trainer_smoke():
    torch.manual_seed(20)
    model = SketchGenerator(TINY_GENERATOR)
    corpus = make_designer_corpus(3, 32, seed=3)
    stats = compute_style_stats(corpus, model.encoder, designer_id="d")
    images, sketches = make_shape_pairs(4, 32, seed=21)
    trainer = I2SMTrainer(model, stats, I2SMTrainConfig(lr=1e-3, batch_size=4, seed=0))
    history = trainer.train(images, sketches, 3)
    assert len(history) == 3
    for rec in history:
        assert set(rec) >= {"gram", "g", "cos", "clip", "total", "d"}
        assert all(v == v for v in rec.values())  # finite, no NaNs
