"""PNG round-tripping and content addressing."""

import hashlib

import pytest
import torch

from haigen.images import content_hash, from_png_bytes, load_png, save_png, to_png_bytes


def test_content_hash_is_sha256_hex():
    data = b"haigen"
    assert content_hash(data) == hashlib.sha256(data).hexdigest()
    assert content_hash(data) != content_hash(b"haigen!")


def test_png_roundtrip_exact_on_quantized_values():
    levels = torch.arange(256, dtype=torch.float32) / 255.0
    image = levels.reshape(1, 16, 16)
    back = from_png_bytes(to_png_bytes(image))
    assert back.shape == (1, 16, 16)
    assert torch.equal(back, image)
    rgb = torch.stack([image[0], image[0].flip(0), image[0].flip(1)])
    assert torch.equal(from_png_bytes(to_png_bytes(rgb)), rgb)


def test_png_clamps_and_validates():
    wild = torch.tensor([[[-1.0, 51 / 255], [2.0, 1.0]]])
    back = from_png_bytes(to_png_bytes(wild))
    assert torch.equal(back, torch.tensor([[[0.0, 51 / 255], [1.0, 1.0]]]))
    with pytest.raises(ValueError):
        to_png_bytes(torch.rand(2, 4, 4))
    with pytest.raises(ValueError):
        to_png_bytes(torch.rand(1, 3, 4, 4))


def test_channel_conversion_on_decode():
    rgb = torch.rand(3, 8, 8, generator=torch.Generator().manual_seed(0))
    data = to_png_bytes(rgb)
    mono = from_png_bytes(data, channels=1)
    assert mono.shape == (1, 8, 8)
    tri = from_png_bytes(to_png_bytes(torch.rand(1, 8, 8)), channels=3)
    assert tri.shape == (3, 8, 8)
    assert torch.equal(tri[0], tri[1]) and torch.equal(tri[1], tri[2])


def test_save_load_and_hash_agree(tmp_path):
    image = (torch.rand(3, 8, 8, generator=torch.Generator().manual_seed(1)) * 255).round() / 255
    path = tmp_path / "img.png"
    digest = save_png(path, image)
    assert digest == content_hash(path.read_bytes())
    assert torch.equal(load_png(path), image)
