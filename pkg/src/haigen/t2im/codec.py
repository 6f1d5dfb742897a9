"""Linear patch codec mapping RGB images to a compact latent grid.

A PCA basis over non-overlapping patches gives an exactly invertible-enough
autoencoder for pipeline work without a pretrained VAE: encode projects each
patch onto the top components, decode reconstructs from them. Fit is closed
form, deterministic, and cheap on CPU.
"""

from __future__ import annotations

import io
import json

import numpy as np
import torch

from ..images import _require_chw_batch


class CodecError(ValueError):
    pass


class LatentCodec:
    """PCA autoencoder over non-overlapping ``patch x patch`` RGB patches.

    encode: (B, 3, H, W) -> (B, latent_channels, H/patch, W/patch)
    decode: inverse linear map back to image space.
    """

    def __init__(self, patch: int = 4, latent_channels: int = 4, image_channels: int = 3):
        if patch < 1 or latent_channels < 1:
            raise CodecError("patch and latent_channels must be >= 1")
        dim = patch * patch * image_channels
        if latent_channels > dim:
            raise CodecError(f"latent_channels {latent_channels} exceeds patch dim {dim}")
        self.patch = patch
        self.latent_channels = latent_channels
        self.image_channels = image_channels
        self.components: torch.Tensor | None = None  # (k, dim)
        self.mean: torch.Tensor | None = None  # (dim,)
        self.latent_scale: torch.Tensor | None = None  # (k,)

    @property
    def fitted(self) -> bool:
        return self.components is not None

    @property
    def codec_id(self) -> str:
        return f"pca-p{self.patch}-c{self.latent_channels}"

    def _patches(self, x: torch.Tensor) -> torch.Tensor:
        # (B, C, H, W) -> (B, n, patch*patch*C), row-major over the patch grid
        p = self.patch
        B, C, H, W = x.shape
        u = x.unfold(2, p, p).unfold(3, p, p)  # (B, C, H/p, W/p, p, p)
        u = u.permute(0, 2, 3, 1, 4, 5).reshape(B, (H // p) * (W // p), C * p * p)
        return u

    def fit(self, images: torch.Tensor) -> float:
        """Fit the PCA basis; returns the mean relative reconstruction error."""
        _require_chw_batch(images, self.image_channels)
        if images.shape[2] % self.patch or images.shape[3] % self.patch:
            raise CodecError("image size must be divisible by patch")
        flat = self._patches(images).reshape(-1, self.patch * self.patch * self.image_channels)
        X = flat.double()
        mean = X.mean(dim=0)
        Xc = X - mean
        # SVD of the centered patch matrix; rows of Vh are principal directions
        _, S, Vh = torch.linalg.svd(Xc, full_matrices=False)
        comps = Vh[: self.latent_channels]
        Z = Xc @ comps.T
        scale = Z.std(dim=0, unbiased=False).clamp_min(1e-8)
        self.components = comps.float()
        self.mean = mean.float()
        self.latent_scale = scale.float()
        return self.roundtrip_error(images)

    def _require_fitted(self) -> None:
        if not self.fitted:
            raise CodecError("codec is not fitted; call fit() or load()")

    def encode(self, x: torch.Tensor) -> torch.Tensor:
        self._require_fitted()
        _require_chw_batch(x, self.image_channels)
        p = self.patch
        B, _, H, W = x.shape
        if H % p or W % p:
            raise CodecError("image size must be divisible by patch")
        z = (self._patches(x) - self.mean) @ self.components.T / self.latent_scale
        return z.reshape(B, H // p, W // p, self.latent_channels).permute(0, 3, 1, 2).contiguous()

    def decode(self, z: torch.Tensor) -> torch.Tensor:
        self._require_fitted()
        if z.dim() != 4 or z.shape[1] != self.latent_channels:
            raise CodecError(f"expected (B, {self.latent_channels}, h, w), got {tuple(z.shape)}")
        p, C = self.patch, self.image_channels
        B, k, h, w = z.shape
        flat = z.permute(0, 2, 3, 1).reshape(B, h * w, k)
        rec = flat * self.latent_scale @ self.components + self.mean
        rec = rec.reshape(B, h, w, C, p, p).permute(0, 3, 1, 4, 2, 5)
        return rec.reshape(B, C, h * p, w * p).contiguous()

    def roundtrip_error(self, x: torch.Tensor) -> float:
        """Mean relative L2 error of decode(encode(x)) against x."""
        rec = self.decode(self.encode(x))
        num = torch.linalg.vector_norm((rec - x).reshape(x.shape[0], -1), dim=1)
        den = torch.linalg.vector_norm(x.reshape(x.shape[0], -1), dim=1).clamp_min(1e-12)
        return float((num / den).mean())

    def save(self, path) -> None:
        self._require_fitted()
        buf = io.BytesIO()
        np.savez(
            buf,
            components=self.components.numpy(),
            mean=self.mean.numpy(),
            latent_scale=self.latent_scale.numpy(),
            manifest=np.frombuffer(
                json.dumps(
                    {
                        "patch": self.patch,
                        "latent_channels": self.latent_channels,
                        "image_channels": self.image_channels,
                    }
                ).encode("utf-8"),
                dtype=np.uint8,
            ),
        )
        with open(path, "wb") as fh:
            fh.write(buf.getvalue())

    @classmethod
    def load(cls, path) -> "LatentCodec":
        with open(path, "rb") as fh:
            blob = np.load(io.BytesIO(fh.read()))
        manifest = json.loads(bytes(blob["manifest"]).decode("utf-8"))
        codec = cls(
            patch=manifest["patch"],
            latent_channels=manifest["latent_channels"],
            image_channels=manifest["image_channels"],
        )
        codec.components = torch.from_numpy(blob["components"]).float()
        codec.mean = torch.from_numpy(blob["mean"]).float()
        codec.latent_scale = torch.from_numpy(blob["latent_scale"]).float()
        return codec
