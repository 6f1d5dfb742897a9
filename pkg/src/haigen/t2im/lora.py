"""Low-rank residual adapters for frozen linear projections.

An adapter adds ``scale * up(down(f))`` on top of the frozen base projection
``W0 f``.  ``down`` maps the d-dim input to rank r, ``up`` maps rank r to the
k-dim output, so the residual weight is ``up @ down`` with shape (k, d).  The
up factor is zero-initialized: freshly created adapters change nothing.
"""

from __future__ import annotations

import hashlib
import io
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Mapping

import numpy as np
import torch
from torch import nn


class AdapterError(ValueError):
    pass


def _tensor_digest(t: torch.Tensor) -> str:
    return hashlib.sha256(t.detach().to(torch.float32).contiguous().numpy().tobytes()).hexdigest()


@dataclass
class LoRAAdapter:
    """A (down, up) factor pair targeting one named projection."""

    name: str
    down: torch.Tensor  # (r, d): input -> rank
    up: torch.Tensor    # (k, r): rank -> output
    scale: float = 1.0

    def __post_init__(self) -> None:
        if self.down.dim() != 2 or self.up.dim() != 2:
            raise AdapterError("down and up must be matrices")
        if self.up.shape[1] != self.down.shape[0]:
            raise AdapterError(
                f"rank mismatch: up is {tuple(self.up.shape)}, down is {tuple(self.down.shape)}"
            )
        r, d = self.down.shape
        k = self.up.shape[0]
        if r < 1:
            raise AdapterError("rank must be >= 1")
        if r > min(d, k) // 2:
            raise AdapterError(f"rank {r} too large for a {d}->{k} projection (max {min(d, k) // 2})")
        if self.scale < 0:
            raise AdapterError("scale must be >= 0")

    @property
    def rank(self) -> int:
        return int(self.down.shape[0])

    @property
    def d(self) -> int:
        return int(self.down.shape[1])

    @property
    def k(self) -> int:
        return int(self.up.shape[0])

    def delta(self) -> torch.Tensor:
        """The dense residual weight up @ down, shape (k, d)."""
        return self.up @ self.down

    def content_key(self) -> tuple:
        """Deterministic ordering key so residual sums are order-independent."""
        return (self.name, self.rank, self.scale, _tensor_digest(self.down), _tensor_digest(self.up))

    @classmethod
    def create(cls, name: str, d: int, k: int, rank: int, scale: float = 1.0,
               seed: int = 0, dtype: torch.dtype = torch.float32) -> "LoRAAdapter":
        """Fresh adapter: Gaussian down factor, zero up factor (zero residual)."""
        gen = torch.Generator().manual_seed(seed)
        down = torch.randn(rank, d, generator=gen, dtype=dtype) / d**0.5
        up = torch.zeros(k, rank, dtype=dtype)
        return cls(name=name, down=down, up=up, scale=scale)


def lora_forward(
    base: Callable[[torch.Tensor], torch.Tensor] | torch.Tensor,
    adapter: LoRAAdapter,
    f: torch.Tensor,
) -> torch.Tensor:
    """Adapted projection: base(f) + scale * up(down(f)).

    ``base`` is either the frozen projection as a callable or its (k, d)
    weight matrix.
    """
    if f.shape[-1] != adapter.d:
        raise AdapterError(f"input dim {f.shape[-1]} does not match adapter d={adapter.d}")
    if isinstance(base, torch.Tensor):
        if base.shape != (adapter.k, adapter.d):
            raise AdapterError(
                f"base weight {tuple(base.shape)} incompatible with adapter ({adapter.k}, {adapter.d})"
            )
        y0 = f @ base.T
    else:
        y0 = base(f)
    if y0.shape[-1] != adapter.k:
        raise AdapterError(f"base output dim {y0.shape[-1]} does not match adapter k={adapter.k}")
    residual = (f @ adapter.down.T) @ adapter.up.T
    return y0 + adapter.scale * residual


def lora_merge(
    base_weights: Mapping[str, torch.Tensor],
    adapters: Iterable[LoRAAdapter],
) -> dict[str, torch.Tensor]:
    """Fold adapter residuals into dense weights: W = W0 + sum scale_i * dW_i.

    Multiple adapters may target the same projection (their residuals add,
    ranks need not match).  Residuals are summed in a canonical content order
    so merging is independent of the input ordering.  Targets missing from
    ``base_weights`` are an error.
    """
    merged = {name: w.clone() for name, w in base_weights.items()}
    for adapter in sorted(adapters, key=lambda a: a.content_key()):
        if adapter.name not in merged:
            raise AdapterError(f"adapter targets unknown projection {adapter.name!r}")
        w = merged[adapter.name]
        if w.shape != (adapter.k, adapter.d):
            raise AdapterError(
                f"projection {adapter.name!r} has shape {tuple(w.shape)}, "
                f"adapter expects ({adapter.k}, {adapter.d})"
            )
        if adapter.scale != 0.0:
            w += adapter.scale * adapter.delta()
    return merged


class LoRABranch(nn.Module):
    """Trainable module form of one adapter, attachable to AdaptedLinear."""

    def __init__(self, adapter: LoRAAdapter, trainable: bool = True):
        super().__init__()
        self.target = adapter.name
        self.scale = float(adapter.scale)
        self.down = nn.Parameter(adapter.down.detach().clone(), requires_grad=trainable)
        self.up = nn.Parameter(adapter.up.detach().clone(), requires_grad=trainable)

    def forward(self, f: torch.Tensor) -> torch.Tensor:
        return self.scale * ((f @ self.down.T) @ self.up.T)

    def to_adapter(self) -> LoRAAdapter:
        return LoRAAdapter(name=self.target, down=self.down.detach().clone(),
                           up=self.up.detach().clone(), scale=self.scale)


class AdaptedLinear(nn.Module):
    """A frozen linear projection with attachable low-rank branches.

    The base weight never receives gradients; attach/detach only changes the
    residual path, so a freshly attached (zero up factor) branch leaves the
    output bit-identical.
    """

    def __init__(self, in_features: int, out_features: int, name: str, bias: bool = False):
        super().__init__()
        self.name = name
        self.base = nn.Linear(in_features, out_features, bias=bias)
        self.base.weight.requires_grad_(False)
        if self.base.bias is not None:
            self.base.bias.requires_grad_(False)
        self.branches = nn.ModuleList()

    @property
    def in_features(self) -> int:
        return self.base.in_features

    @property
    def out_features(self) -> int:
        return self.base.out_features

    def attach(self, adapter: LoRAAdapter, trainable: bool = True) -> LoRABranch:
        if adapter.name != self.name:
            raise AdapterError(f"adapter targets {adapter.name!r}, projection is {self.name!r}")
        if (adapter.k, adapter.d) != (self.out_features, self.in_features):
            raise AdapterError(
                f"adapter ({adapter.k}, {adapter.d}) incompatible with projection "
                f"({self.out_features}, {self.in_features})"
            )
        branch = LoRABranch(adapter, trainable=trainable)
        self.branches.append(branch)
        return branch

    def detach_all(self) -> None:
        self.branches = nn.ModuleList()

    def forward(self, f: torch.Tensor) -> torch.Tensor:
        out = self.base(f)
        for branch in self.branches:
            out = out + branch(f)
        return out


def save_adapter(path: str | Path, adapter: LoRAAdapter) -> None:
    """Binary adapter file: npz blob with a manifest and per-factor checksums."""
    manifest = {
        "name": adapter.name,
        "d": adapter.d,
        "k": adapter.k,
        "r": adapter.rank,
        "scale": adapter.scale,
        "checksums": {
            "down": _tensor_digest(adapter.down),
            "up": _tensor_digest(adapter.up),
        },
    }
    buf = io.BytesIO()
    np.savez(
        buf,
        manifest=np.frombuffer(json.dumps(manifest).encode("utf-8"), dtype=np.uint8),
        down=adapter.down.detach().to(torch.float32).numpy(),
        up=adapter.up.detach().to(torch.float32).numpy(),
    )
    Path(path).write_bytes(buf.getvalue())


def load_adapter(path: str | Path) -> LoRAAdapter:
    with np.load(Path(path)) as blob:
        manifest = json.loads(bytes(blob["manifest"]).decode("utf-8"))
        down = torch.from_numpy(blob["down"].copy())
        up = torch.from_numpy(blob["up"].copy())
    adapter = LoRAAdapter(name=manifest["name"], down=down, up=up, scale=float(manifest["scale"]))
    sums = manifest["checksums"]
    if _tensor_digest(down) != sums["down"] or _tensor_digest(up) != sums["up"]:
        raise AdapterError(f"checksum mismatch loading adapter from {path}")
    return adapter
