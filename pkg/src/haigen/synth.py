"""Synthetic shape corpora and simple perceptual probes.

Flat-colored shapes on a light background, paired with thin-stroke outline
sketches of the same geometry. Small models learn these pairs in a few
hundred steps, which makes them the right substrate for smoke training and
for the conditioning probes (edge overlap, mean hue) used to check that a
trained coloring model actually listens to its inputs.
"""

from __future__ import annotations

import numpy as np
import torch

PALETTE = (
    (0.85, 0.15, 0.15),
    (0.15, 0.60, 0.20),
    (0.15, 0.25, 0.80),
    (0.90, 0.65, 0.10),
    (0.60, 0.15, 0.70),
    (0.10, 0.65, 0.70),
)


def _shape_mask(kind: int, size: int, cx: float, cy: float, r: float) -> np.ndarray:
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    if kind == 0:  # circle
        return (xx - cx) ** 2 + (yy - cy) ** 2 <= r * r
    if kind == 1:  # axis-aligned square
        return (np.abs(xx - cx) <= r) & (np.abs(yy - cy) <= r)
    if kind == 2:  # upright triangle
        h = r * 1.6
        inside = (yy >= cy - h / 2) & (yy <= cy + h / 2)
        half_width = (yy - (cy - h / 2)) / h * r
        return inside & (np.abs(xx - cx) <= half_width)
    # diamond
    return np.abs(xx - cx) + np.abs(yy - cy) <= r * 1.2


def _outline(mask: np.ndarray, width: int = 2) -> np.ndarray:
    m = torch.from_numpy(mask.astype(np.float32))[None, None]
    eroded = -torch.nn.functional.max_pool2d(-m, 2 * width + 1, stride=1, padding=width)
    return ((m - eroded) > 0.5)[0, 0].numpy()


def make_shape_pairs(
    n: int,
    size: int = 64,
    seed: int = 0,
    background: float = 0.92,
    radius_range: tuple[float, float] = (0.18, 0.32),
) -> tuple[torch.Tensor, torch.Tensor]:
    """(images (n,3,s,s), sketches (n,1,s,s)): filled shape + its outline."""
    rng = np.random.default_rng(seed)
    images = np.full((n, 3, size, size), background, dtype=np.float32)
    sketches = np.ones((n, 1, size, size), dtype=np.float32)
    for i in range(n):
        kind = int(rng.integers(0, 3))
        r = float(rng.uniform(size * radius_range[0], size * radius_range[1]))
        cx = float(rng.uniform(r + 2, size - r - 2))
        cy = float(rng.uniform(r + 2, size - r - 2))
        color = PALETTE[int(rng.integers(0, len(PALETTE)))]
        mask = _shape_mask(kind, size, cx, cy, r)
        for c in range(3):
            images[i, c][mask] = color[c]
        sketches[i, 0][_outline(mask)] = 0.0
    return torch.from_numpy(images), torch.from_numpy(sketches)


GRID_COLORS = (
    (0.15, 0.60, 0.20),
    (0.10, 0.65, 0.70),
    (0.15, 0.25, 0.80),
    (0.60, 0.15, 0.70),
)


def make_grid_pairs(
    size: int = 64, seed: int = 0, background: float = 0.92
) -> tuple[torch.Tensor, torch.Tensor]:
    """A factorial corpus: 4 geometries x 4 fill colors, 16 pairs.

    Each sketch appears with every fill color, so the sketch carries no color
    information; a model can only resolve the fill by reading its style input.
    """
    rng = np.random.default_rng(seed)
    geoms = []
    for kind in range(4):
        r = float(rng.uniform(size * 0.24, size * 0.36))
        cx = float(rng.uniform(r + 3, size - r - 3))
        cy = float(rng.uniform(r + 3, size - r - 3))
        geoms.append(_shape_mask(kind, size, cx, cy, r))
    images = np.full((16, 3, size, size), background, dtype=np.float32)
    sketches = np.ones((16, 1, size, size), dtype=np.float32)
    for g, mask in enumerate(geoms):
        outline = _outline(mask)
        for k, color in enumerate(GRID_COLORS):
            i = g * 4 + k
            for c in range(3):
                images[i, c][mask] = color[c]
            sketches[i, 0][outline] = 0.0
    return torch.from_numpy(images), torch.from_numpy(sketches)


def make_designer_corpus(
    n: int, size: int = 64, seed: int = 0, stroke: float = 0.05, background: float = 0.98
) -> torch.Tensor:
    """Outline-only sketches (n,1,s,s) that stand in for a designer's corpus."""
    rng = np.random.default_rng(seed)
    out = np.full((n, 1, size, size), background, dtype=np.float32)
    for i in range(n):
        kind = int(rng.integers(0, 3))
        r = float(rng.uniform(size * 0.18, size * 0.32))
        cx = float(rng.uniform(r + 2, size - r - 2))
        cy = float(rng.uniform(r + 2, size - r - 2))
        out[i, 0][_outline(_shape_mask(kind, size, cx, cy, r))] = stroke
    return torch.from_numpy(out)


def flat_color(rgb: tuple[float, float, float], size: int = 64) -> torch.Tensor:
    img = torch.empty(3, size, size)
    for c, v in enumerate(rgb):
        img[c].fill_(float(v))
    return img


def recolor(
    image: torch.Tensor, rgb: tuple[float, float, float], background: float = 0.92
) -> torch.Tensor:
    """Repaint the non-background region of a shape image with a new color."""
    if image.dim() != 3 or image.shape[0] != 3:
        raise ValueError("recolor expects (3, H, W)")
    mask = (image - background).abs().amax(dim=0) > 0.05
    out = image.clone()
    for c, v in enumerate(rgb):
        out[c][mask] = float(v)
    return out


def edge_map(image: torch.Tensor, threshold: float = 0.1) -> torch.Tensor:
    """Boolean (H, W) mask of strong luminance gradients."""
    if image.dim() == 3:
        gray = image.mean(dim=0)
    elif image.dim() == 2:
        gray = image
    else:
        raise ValueError("edge_map expects (C, H, W) or (H, W)")
    gx = torch.zeros_like(gray)
    gy = torch.zeros_like(gray)
    gx[:, 1:] = gray[:, 1:] - gray[:, :-1]
    gy[1:, :] = gray[1:, :] - gray[:-1, :]
    return (gx * gx + gy * gy).sqrt() > threshold


def edge_iou(a: torch.Tensor, b: torch.Tensor) -> float:
    """Intersection over union of two boolean masks."""
    if a.shape != b.shape:
        raise ValueError("masks must align")
    inter = (a & b).sum().item()
    union = (a | b).sum().item()
    if union == 0:
        return 1.0
    return inter / union


def stroke_mask(sketch: torch.Tensor, threshold: float = 0.5) -> torch.Tensor:
    """Dark pixels of a 1-channel sketch as a boolean (H, W) mask."""
    s = sketch[0] if sketch.dim() == 3 else sketch
    return s < threshold


def rgb_to_hue(r: float, g: float, b: float) -> float:
    """Hue of one color in [0, 1); 0.0 for gray."""
    cmax, cmin = max(r, g, b), min(r, g, b)
    d = cmax - cmin
    if d < 1e-8:
        return 0.0
    if cmax == r:
        return ((g - b) / d % 6.0) / 6.0
    if cmax == g:
        return ((b - r) / d + 2.0) / 6.0
    return ((r - g) / d + 4.0) / 6.0


def region_hue(image: torch.Tensor, mask: torch.Tensor) -> float:
    """Hue of the mean color inside a boolean (H, W) region.

    Averaging RGB before the hue conversion keeps speckle from wrapping the
    estimate around the hue circle, and the mask keeps background tint from
    swamping the fill color of a small shape.
    """
    if image.dim() != 3 or image.shape[0] != 3:
        raise ValueError("region_hue expects (3, H, W)")
    if not bool(mask.any()):
        return 0.0
    return rgb_to_hue(*(float(image[c][mask].mean()) for c in range(3)))


def mean_hue(image: torch.Tensor) -> float:
    """Saturation-weighted mean hue in [0, 1); gray pixels carry no weight."""
    if image.dim() != 3 or image.shape[0] != 3:
        raise ValueError("mean_hue expects (3, H, W)")
    r, g, b = image[0], image[1], image[2]
    cmax, _ = image.max(dim=0)
    cmin, _ = image.min(dim=0)
    delta = cmax - cmin
    hue = torch.zeros_like(cmax)
    nz = delta > 1e-8
    rmax = nz & (cmax == r)
    gmax = nz & (cmax == g) & ~rmax
    bmax = nz & ~rmax & ~gmax
    hue[rmax] = (((g - b)[rmax] / delta[rmax]) % 6.0) / 6.0
    hue[gmax] = ((b - r)[gmax] / delta[gmax] + 2.0) / 6.0
    hue[bmax] = ((r - g)[bmax] / delta[bmax] + 4.0) / 6.0
    weight = delta
    total = float(weight.sum())
    if total <= 1e-8:
        return 0.0
    return float((hue * weight).sum() / total)
