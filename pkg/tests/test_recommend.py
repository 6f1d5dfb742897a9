"""Retrieval index: exact ranking, tie-breaks, binary format, and the embedder."""

import math

import pytest
import torch

from haigen.images import save_png
from haigen.recommend.encoder import ToyVisionEncoder, embed
from haigen.recommend.index import (
    EmbeddingIndex,
    EmbeddingVector,
    RecommendError,
    SketchIndexEntry,
    cosine_similarity,
    index_from_library,
    top_k,
)
from haigen.sketch.apsn import compute_style_stats
from haigen.sketch.encoder import EncoderConfig, SketchEncoder
from haigen.sketch.library import build_library
from haigen.sketch.model import SketchGenerator, SketchGeneratorConfig
from haigen.synth import make_designer_corpus, make_shape_pairs


def _entry(eid: str, vec: torch.Tensor, encoder_id: str = "enc", content: str | None = None):
    return SketchIndexEntry(
        id=eid, path=f"{eid}.png", designer_id="d",
        embedding=EmbeddingVector(v=vec, encoder_id=encoder_id),
        content_hash=content if content is not None else f"hash-{eid}",
    )


def _brute_force(query: torch.Tensor, entries: dict[str, torch.Tensor], k: int):
    scored = []
    for eid, vec in entries.items():
        q = query.double()
        v = vec.double()
        score = float(q @ v / (float(q.norm()) * float(v.norm())))
        scored.append((eid, score))
    scored.sort(key=lambda p: (-p[1], p[0]))
    return scored[:k]


# ---- cosine -----------------------------------------------------------------


def test_cosine_similarity_basics():
    a = torch.tensor([1.0, 0.0])
    b = torch.tensor([0.0, 2.0])
    assert abs(cosine_similarity(a, b)) <= 1e-12
    assert abs(cosine_similarity(a, torch.tensor([3.0, 0.0])) - 1.0) <= 1e-12
    assert abs(cosine_similarity(a, -a) + 1.0) <= 1e-12
    diag = torch.tensor([1.0, 1.0])
    assert abs(cosine_similarity(a, diag) - 1.0 / math.sqrt(2.0)) <= 1e-12
    wrapped = cosine_similarity(EmbeddingVector(a, "e"), EmbeddingVector(diag, "e"))
    assert wrapped == cosine_similarity(a, diag)
    with pytest.raises(RecommendError):
        cosine_similarity(a, torch.zeros(2))
    with pytest.raises(RecommendError):
        cosine_similarity(a, torch.ones(3))


def test_embedding_vector_validation():
    with pytest.raises(RecommendError):
        EmbeddingVector(v=torch.zeros(2, 2), encoder_id="e")
    with pytest.raises(RecommendError):
        EmbeddingVector(v=torch.tensor([1.0, float("nan")]), encoder_id="e")


# ---- index membership -------------------------------------------------------


def test_index_add_rules():
    index = EmbeddingIndex(encoder_id="enc")
    assert index.add(_entry("a", torch.tensor([1.0, 0.0])))
    assert len(index) == 1
    with pytest.raises(RecommendError):
        index.add(_entry("a", torch.tensor([0.0, 1.0])))  # duplicate id
    with pytest.raises(RecommendError):
        index.add(_entry("b", torch.tensor([0.0, 1.0]), encoder_id="other"))
    # same content under a new id dedupes silently
    assert index.add(_entry("b", torch.tensor([0.0, 1.0]), content="hash-a")) is False
    assert len(index) == 1
    assert index.add(_entry("b", torch.tensor([0.0, 1.0])))
    assert len(index) == 2


# ---- ranking ----------------------------------------------------------------


def test_top_k_matches_brute_force():
    gen = torch.Generator().manual_seed(0)
    vectors = {f"id{i:03d}": torch.randn(16, generator=gen) for i in range(200)}
    index = EmbeddingIndex(encoder_id="enc")
    for eid, vec in vectors.items():
        index.add(_entry(eid, vec))
    for qseed in range(20):
        qgen = torch.Generator().manual_seed(1000 + qseed)
        query = EmbeddingVector(torch.randn(16, generator=qgen), "enc")
        for k in (1, 5, 200):
            got = top_k(query, index, k)
            expected = _brute_force(query.v, vectors, k)
            assert [(e.id, s) for e, s in got] == expected


def test_top_k_tie_break_is_ascending_id():
    base = torch.tensor([1.0, 1.0])
    index = EmbeddingIndex(encoder_id="enc")
    # identical directions (different magnitudes) score identically
    for eid, scale in (("zz", 1.0), ("aa", 2.0), ("mm", 0.5)):
        index.add(_entry(eid, base * scale))
    index.add(_entry("far", torch.tensor([1.0, -1.0])))
    got = top_k(EmbeddingVector(base, "enc"), index, 4)
    assert [e.id for e, _ in got] == ["aa", "mm", "zz", "far"]


def test_top_k_rescaling_never_changes_ranks():
    gen = torch.Generator().manual_seed(2)
    vectors = {f"e{i}": torch.randn(8, generator=gen) for i in range(30)}
    index = EmbeddingIndex(encoder_id="enc")
    scaled = EmbeddingIndex(encoder_id="enc")
    for i, (eid, vec) in enumerate(vectors.items()):
        index.add(_entry(eid, vec))
        scaled.add(_entry(eid, vec * (0.1 + 3.0 * ((i * 37) % 7))))
    query = EmbeddingVector(torch.randn(8, generator=gen), "enc")
    plain_ids = [e.id for e, _ in top_k(query, index, 30)]
    scaled_ids = [e.id for e, _ in top_k(query, scaled, 30)]
    boosted_ids = [e.id for e, _ in top_k(EmbeddingVector(query.v * 12.5, "enc"), index, 30)]
    assert plain_ids == scaled_ids == boosted_ids


def test_top_k_validation_and_clamping():
    index = EmbeddingIndex(encoder_id="enc")
    query = EmbeddingVector(torch.tensor([1.0, 0.0]), "enc")
    with pytest.raises(RecommendError):
        top_k(query, index, 1)  # empty
    index.add(_entry("a", torch.tensor([1.0, 0.0])))
    with pytest.raises(RecommendError):
        top_k(query, index, 0)
    with pytest.raises(RecommendError):
        top_k(EmbeddingVector(torch.tensor([1.0, 0.0]), "other"), index, 1)
    assert len(top_k(query, index, 99)) == 1  # k clamps to the index size


# ---- binary format ----------------------------------------------------------


def test_index_save_load_roundtrip(tmp_path):
    gen = torch.Generator().manual_seed(3)
    index = EmbeddingIndex(encoder_id="enc")
    for i in range(5):
        index.add(_entry(f"s{i}", torch.randn(6, generator=gen)))
    path = tmp_path / "sketches.hgix"
    index.save(path)
    loaded = EmbeddingIndex.load(path)
    assert loaded.encoder_id == "enc" and len(loaded) == 5
    for eid, entry in index.entries.items():
        clone = loaded.entries[eid]
        assert torch.equal(clone.embedding.v, entry.embedding.v)
        assert (clone.path, clone.designer_id, clone.content_hash) == (
            entry.path, entry.designer_id, entry.content_hash)
    query = EmbeddingVector(torch.randn(6, generator=gen), "enc")
    assert [(e.id, s) for e, s in top_k(query, index, 5)] == \
        [(e.id, s) for e, s in top_k(query, loaded, 5)]


def test_index_load_rejects_corruption(tmp_path):
    index = EmbeddingIndex(encoder_id="enc")
    index.add(_entry("a", torch.tensor([1.0, 0.0, 0.0])))
    path = tmp_path / "idx.hgix"
    index.save(path)
    data = path.read_bytes()
    bad_magic = tmp_path / "bad_magic.hgix"
    bad_magic.write_bytes(b"NOPE!\n" + data[6:])
    with pytest.raises(RecommendError, match="not an index file"):
        EmbeddingIndex.load(bad_magic)
    truncated = tmp_path / "trunc.hgix"
    truncated.write_bytes(data[: len(data) - 30])
    with pytest.raises(RecommendError):
        EmbeddingIndex.load(truncated)
    empty = EmbeddingIndex(encoder_id="enc")
    epath = tmp_path / "empty.hgix"
    empty.save(epath)
    assert len(EmbeddingIndex.load(epath)) == 0


# ---- vision encoder ---------------------------------------------------------


def test_vision_encoder_determinism_and_channels():
    enc_a = ToyVisionEncoder(dim=16, image_size=32, patch=8, seed=11)
    enc_b = ToyVisionEncoder(dim=16, image_size=32, patch=8, seed=11)
    assert enc_a.encoder_id == "toy-vit-d16-s11"
    gen = torch.Generator().manual_seed(4)
    rgb = torch.rand(1, 3, 32, 32, generator=gen)
    assert torch.equal(enc_a(rgb), enc_b(rgb))
    mono = torch.rand(1, 1, 32, 32, generator=gen)
    assert torch.equal(enc_a(mono), enc_a(mono.expand(-1, 3, -1, -1)))
    resized = enc_a(torch.rand(1, 3, 48, 48, generator=gen))
    assert resized.shape == (1, 16)
    assert enc_a(rgb[0]).shape == (1, 16)  # 3d promotes
    with pytest.raises(RecommendError):
        enc_a(torch.rand(1, 2, 32, 32))
    head = ToyVisionEncoder(dim=16, image_size=32, patch=8, seed=11, head_dim=4)
    assert head.dim == 4 and head(rgb).shape == (1, 4)


def test_embed_single_image_contract():
    enc = ToyVisionEncoder(dim=16, image_size=32, patch=8, seed=11)
    image = torch.rand(1, 1, 32, 32, generator=torch.Generator().manual_seed(5))
    vec = embed(image, enc)
    assert vec.encoder_id == enc.encoder_id and vec.v.shape == (16,)
    with pytest.raises(RecommendError):
        embed(torch.rand(2, 1, 32, 32), enc)
    with pytest.raises(RecommendError):
        embed(image, None)


# ---- library integration ----------------------------------------------------


def test_index_from_library(tmp_path):
    torch.manual_seed(6)
    tiny_enc = EncoderConfig(channels=(4, 8, 8, 8), convs_per_block=(1, 1, 1, 1),
                             semantic_dim=8, seed=0)
    model = SketchGenerator(SketchGeneratorConfig(decoder_width=8, encoder=tiny_enc, seed=0))
    images, _ = make_shape_pairs(3, 32, seed=7)
    stats = compute_style_stats(make_designer_corpus(3, 32, seed=3), model.encoder, "d")
    lib_dir = tmp_path / "library"
    report = build_library(list(images), stats, model, lib_dir)
    encoder = ToyVisionEncoder(dim=16, image_size=32, patch=8, seed=11)
    index = index_from_library(lib_dir, encoder)
    assert len(index) == 3
    assert set(index.entries) == {rec["id"] for rec in report.entries}
    query = embed(images[0], encoder)
    ranked = top_k(query, index, 3)
    assert len(ranked) == 3
    assert all(b >= a for (_, a), (_, b) in zip(ranked[1:], ranked))
