"""PNG round-tripping and content hashing for image tensors.

Tensors are CHW float32 in [0, 1] throughout the pipeline; PNG files are
8-bit (grayscale ``L`` for sketches, ``RGB`` for everything else).
"""

from __future__ import annotations

import hashlib
import io
from pathlib import Path

import numpy as np
import torch
from PIL import Image


def content_hash(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _require_chw_batch(x: torch.Tensor, channels: int) -> None:
    if x.dim() != 4 or x.shape[1] != channels:
        raise ValueError(f"expected (B, {channels}, H, W), got {tuple(x.shape)}")


def to_png_bytes(image: torch.Tensor) -> bytes:
    """Encode a CHW [0,1] tensor as PNG bytes (1 channel -> L, 3 -> RGB)."""
    if image.dim() != 3 or image.shape[0] not in (1, 3):
        raise ValueError(f"expected CHW tensor with 1 or 3 channels, got {tuple(image.shape)}")
    arr = (image.detach().clamp(0.0, 1.0) * 255.0).round().to(torch.uint8).numpy()
    if arr.shape[0] == 1:
        pil = Image.fromarray(arr[0], mode="L")
    else:
        pil = Image.fromarray(np.transpose(arr, (1, 2, 0)), mode="RGB")
    buf = io.BytesIO()
    pil.save(buf, format="PNG")
    return buf.getvalue()


def from_png_bytes(data: bytes, channels: int | None = None) -> torch.Tensor:
    """Decode PNG bytes to a CHW float32 tensor in [0,1].

    ``channels`` forces a conversion (1 -> grayscale, 3 -> RGB); by default the
    file's own mode decides.
    """
    pil = Image.open(io.BytesIO(data))
    if channels == 1:
        pil = pil.convert("L")
    elif channels == 3:
        pil = pil.convert("RGB")
    elif pil.mode not in ("L", "RGB"):
        pil = pil.convert("RGB")
    arr = np.asarray(pil, dtype=np.float32) / 255.0
    if arr.ndim == 2:
        arr = arr[None, :, :]
    else:
        arr = np.transpose(arr, (2, 0, 1))
    return torch.from_numpy(arr.copy())


def save_png(path: str | Path, image: torch.Tensor) -> str:
    """Write the tensor as PNG and return the content hash of the bytes."""
    data = to_png_bytes(image)
    Path(path).write_bytes(data)
    return content_hash(data)


def load_png(path: str | Path, channels: int | None = None) -> torch.Tensor:
    return from_png_bytes(Path(path).read_bytes(), channels=channels)
