"""Synthetic corpus generators and the color/edge probe helpers."""

import pytest
import torch

from haigen.synth import (
    GRID_COLORS,
    PALETTE,
    edge_iou,
    edge_map,
    flat_color,
    make_designer_corpus,
    make_grid_pairs,
    make_shape_pairs,
    mean_hue,
    recolor,
    region_hue,
    rgb_to_hue,
    stroke_mask,
)


def test_shape_pairs_shapes_and_range():
    images, sketches = make_shape_pairs(6, size=48, seed=0)
    assert images.shape == (6, 3, 48, 48)
    assert sketches.shape == (6, 1, 48, 48)
    for t in (images, sketches):
        assert t.dtype == torch.float32
        assert float(t.min()) >= 0.0 and float(t.max()) <= 1.0
    # every sketch carries strokes, every image a non-background region
    for i in range(6):
        assert bool((sketches[i] < 0.5).any())
        assert bool(((images[i] - 0.92).abs().amax(dim=0) > 0.05).any())


def test_shape_pairs_deterministic_per_seed():
    a_img, a_sk = make_shape_pairs(4, seed=3)
    b_img, b_sk = make_shape_pairs(4, seed=3)
    c_img, _ = make_shape_pairs(4, seed=4)
    assert torch.equal(a_img, b_img) and torch.equal(a_sk, b_sk)
    assert not torch.equal(a_img, c_img)


def test_grid_pairs_factorial_structure():
    images, sketches = make_grid_pairs(seed=5)
    assert images.shape == (16, 3, 64, 64)
    assert sketches.shape == (16, 1, 64, 64)
    for g in range(4):
        base = sketches[g * 4]
        mask = (images[g * 4] - 0.92).abs().amax(dim=0) > 0.05
        for k in range(4):
            i = g * 4 + k
            # same geometry row: identical sketch, recolored fill
            assert torch.equal(sketches[i], base)
            fill = torch.tensor(GRID_COLORS[k])[:, None, None].expand(3, 64, 64)
            assert torch.equal(images[i][:, mask], fill[:, mask])
    # the four geometries are actually distinct
    for g in range(4):
        for h in range(g + 1, 4):
            assert not torch.equal(sketches[g * 4], sketches[h * 4])


def test_designer_corpus_is_sketch_like():
    corpus = make_designer_corpus(5, 32, seed=1)
    assert corpus.shape == (5, 1, 32, 32)
    for i in range(5):
        dark = corpus[i, 0] < 0.5
        assert bool(dark.any())
        assert float(dark.float().mean()) < 0.5  # strokes, not fills


def test_edge_map_and_iou():
    img = torch.full((3, 16, 16), 0.9)
    img[:, 4:12, 4:12] = 0.1
    edges = edge_map(img)
    assert edges.dtype == torch.bool
    assert bool(edges.any())
    assert edge_iou(edges, edges) == 1.0
    empty = torch.zeros(16, 16, dtype=torch.bool)
    assert edge_iou(empty, empty) == 1.0
    assert edge_iou(edges, empty) == 0.0
    with pytest.raises(ValueError):
        edge_iou(edges, torch.zeros(8, 8, dtype=torch.bool))
    # flat image has no edges
    assert not bool(edge_map(torch.full((3, 16, 16), 0.5)).any())


def test_stroke_mask_thresholds_dark_pixels():
    sk = torch.ones(1, 8, 8)
    sk[0, 2, 3] = 0.0
    mask = stroke_mask(sk)
    assert mask.shape == (8, 8)
    assert bool(mask[2, 3]) and int(mask.sum()) == 1


def test_flat_color_and_recolor():
    img = flat_color((0.2, 0.4, 0.6), size=8)
    assert img.shape == (3, 8, 8)
    assert torch.equal(img[0], torch.full((8, 8), 0.2))
    images, _ = make_shape_pairs(1, size=32, seed=7)
    out = recolor(images[0], (0.9, 0.1, 0.1))
    mask = (images[0] - 0.92).abs().amax(dim=0) > 0.05
    assert torch.equal(out[0][mask], torch.full_like(out[0][mask], 0.9))
    assert torch.equal(out[:, ~mask], images[0][:, ~mask])
    with pytest.raises(ValueError):
        recolor(torch.zeros(1, 8, 8), (1.0, 0.0, 0.0))


def test_rgb_to_hue_primaries():
    assert rgb_to_hue(1.0, 0.0, 0.0) == 0.0
    assert abs(rgb_to_hue(1.0, 1.0, 0.0) - 1 / 6) < 1e-9
    assert abs(rgb_to_hue(0.0, 1.0, 0.0) - 2 / 6) < 1e-9
    assert abs(rgb_to_hue(0.0, 1.0, 1.0) - 3 / 6) < 1e-9
    assert abs(rgb_to_hue(0.0, 0.0, 1.0) - 4 / 6) < 1e-9
    assert abs(rgb_to_hue(1.0, 0.0, 1.0) - 5 / 6) < 1e-9
    assert rgb_to_hue(0.5, 0.5, 0.5) == 0.0  # gray: no hue


def test_region_hue_reads_masked_mean_color():
    img = torch.full((3, 8, 8), 0.92)
    img[0, :4, :] = 0.1
    img[1, :4, :] = 0.7
    img[2, :4, :] = 0.2
    mask = torch.zeros(8, 8, dtype=torch.bool)
    mask[:4, :] = True
    assert abs(region_hue(img, mask) - rgb_to_hue(0.1, 0.7, 0.2)) < 1e-6
    assert region_hue(img, torch.zeros(8, 8, dtype=torch.bool)) == 0.0
    with pytest.raises(ValueError):
        region_hue(torch.zeros(1, 8, 8), mask)


def test_region_hue_ignores_background_tint():
    # a small saturated patch on a large near-gray background: the masked
    # estimate reads the patch, while the global estimate sees mostly noise
    img = torch.full((3, 32, 32), 0.92)
    img[:, 10:14, 10:14] = torch.tensor([0.1, 0.2, 0.8])[:, None, None]
    mask = torch.zeros(32, 32, dtype=torch.bool)
    mask[10:14, 10:14] = True
    hue = region_hue(img, mask)
    assert abs(hue - rgb_to_hue(0.1, 0.2, 0.8)) < 1e-6


def test_mean_hue_saturation_weighting():
    # gray pixels carry no weight, so adding them leaves the estimate alone
    img = flat_color((0.8, 0.2, 0.2), size=8)
    hue = mean_hue(img)
    mixed = img.clone()
    mixed[:, :, :4] = 0.5
    assert abs(mean_hue(mixed) - hue) < 1e-6
    assert mean_hue(flat_color((0.5, 0.5, 0.5), size=8)) == 0.0


def test_grid_colors_have_distinct_hues():
    hues = [rgb_to_hue(*c) for c in GRID_COLORS]
    assert len({round(h, 3) for h in hues}) == len(GRID_COLORS)
    assert len(PALETTE) >= 3
