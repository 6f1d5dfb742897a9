"""Exhaustive cosine-similarity retrieval over a sketch library.

Scoring runs in float64 and ties break on ascending entry id, so rankings
are exactly reproducible and match a brute-force sort. The index file is a
fixed-width binary: one JSON header line, the raw little-endian float32
embedding block, then one JSON manifest line per entry.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

_MAGIC = b"HGIX1\n"


class RecommendError(ValueError):
    pass


@dataclass
class EmbeddingVector:
    v: torch.Tensor  # (D,)
    encoder_id: str

    def __post_init__(self) -> None:
        if self.v.dim() != 1:
            raise RecommendError(f"embedding must be a flat vector, got {tuple(self.v.shape)}")
        if not torch.isfinite(self.v).all():
            raise RecommendError("embedding contains non-finite values")


@dataclass
class SketchIndexEntry:
    id: str
    path: str
    designer_id: str
    embedding: EmbeddingVector
    content_hash: str


def cosine_similarity(a: EmbeddingVector | torch.Tensor, b: EmbeddingVector | torch.Tensor) -> float:
    """A.B / (|A||B|) in float64; zero vectors are rejected as undefined."""
    va = (a.v if isinstance(a, EmbeddingVector) else a).double()
    vb = (b.v if isinstance(b, EmbeddingVector) else b).double()
    if va.shape != vb.shape:
        raise RecommendError(f"dimension mismatch: {tuple(va.shape)} vs {tuple(vb.shape)}")
    na, nb = float(va.norm()), float(vb.norm())
    if na == 0.0 or nb == 0.0:
        raise RecommendError("cosine similarity of a zero vector is undefined")
    return float(va @ vb / (na * nb))


@dataclass
class EmbeddingIndex:
    encoder_id: str
    entries: dict[str, SketchIndexEntry] = field(default_factory=dict)
    _hashes: set = field(default_factory=set)

    def __len__(self) -> int:
        return len(self.entries)

    def add(self, entry: SketchIndexEntry) -> bool:
        """Insert unless the content hash is already present; True if added."""
        if entry.embedding.encoder_id != self.encoder_id:
            raise RecommendError(
                f"entry encoded with {entry.embedding.encoder_id!r}, "
                f"index uses {self.encoder_id!r}"
            )
        if entry.id in self.entries:
            raise RecommendError(f"duplicate entry id {entry.id!r}")
        if entry.content_hash in self._hashes:
            return False
        self.entries[entry.id] = entry
        self._hashes.add(entry.content_hash)
        return True

    def save(self, path: str | Path) -> None:
        ids = sorted(self.entries)
        dim = self.entries[ids[0]].embedding.v.shape[0] if ids else 0
        header = json.dumps(
            {"version": 1, "encoder_id": self.encoder_id, "dim": dim, "count": len(ids)}
        ).encode("utf-8")
        block = (
            np.stack([self.entries[i].embedding.v.numpy() for i in ids])
            .astype("<f4").tobytes()
            if ids else b""
        )
        with open(path, "wb") as fh:
            fh.write(_MAGIC)
            fh.write(header + b"\n")
            fh.write(block)
            for i in ids:
                e = self.entries[i]
                fh.write(
                    json.dumps(
                        {"id": e.id, "path": e.path, "designer_id": e.designer_id,
                         "content_hash": e.content_hash}
                    ).encode("utf-8") + b"\n"
                )

    @classmethod
    def load(cls, path: str | Path) -> "EmbeddingIndex":
        with open(path, "rb") as fh:
            data = fh.read()
        if not data.startswith(_MAGIC):
            raise RecommendError("not an index file")
        rest = data[len(_MAGIC):]
        try:
            nl = rest.index(b"\n")
            header = json.loads(rest[:nl].decode("utf-8"))
            dim, count = header["dim"], header["count"]
        except (ValueError, KeyError, UnicodeDecodeError) as exc:
            raise RecommendError(f"index header corrupt: {exc}") from None
        body = rest[nl + 1:]
        block_len = count * dim * 4
        if len(body) < block_len:
            raise RecommendError("index file truncated")
        vectors = np.frombuffer(body[:block_len], dtype="<f4").reshape(count, dim).copy()
        index = cls(encoder_id=header["encoder_id"])
        try:
            lines = body[block_len:].decode("utf-8").splitlines()
        except UnicodeDecodeError:
            raise RecommendError("index manifest corrupt") from None
        if len(lines) != count:
            raise RecommendError("manifest count does not match header")
        for row, line in zip(vectors, lines):
            try:
                rec = json.loads(line)
            except ValueError:
                raise RecommendError("index manifest corrupt") from None
            index.add(
                SketchIndexEntry(
                    id=rec["id"], path=rec["path"], designer_id=rec["designer_id"],
                    embedding=EmbeddingVector(torch.from_numpy(row), header["encoder_id"]),
                    content_hash=rec["content_hash"],
                )
            )
        return index


def top_k(
    query: EmbeddingVector, index: EmbeddingIndex, k: int
) -> list[tuple[SketchIndexEntry, float]]:
    """Exhaustive ranking: scores non-increasing, ties by ascending id."""
    if k < 1:
        raise RecommendError("k must be >= 1")
    if len(index) == 0:
        raise RecommendError("index is empty")
    if query.encoder_id != index.encoder_id:
        raise RecommendError(
            f"query encoded with {query.encoder_id!r}, index uses {index.encoder_id!r}"
        )
    scored = [(e, cosine_similarity(query, e.embedding)) for e in index.entries.values()]
    scored.sort(key=lambda pair: (-pair[1], pair[0].id))
    return scored[: min(k, len(scored))]


def index_from_library(
    library_dir: str | Path, encoder, loader=None
) -> EmbeddingIndex:
    """Embed every sketch recorded in a library manifest into a fresh index."""
    from ..images import load_png
    from ..sketch.library import read_manifest
    from .encoder import embed as _embed

    load = loader or (lambda p: load_png(p, channels=1))
    lib = Path(library_dir)
    index = EmbeddingIndex(encoder_id=encoder.encoder_id)
    for rec in read_manifest(lib).values():
        sketch = load(lib / rec["path"])
        index.add(
            SketchIndexEntry(
                id=rec["id"], path=rec["path"], designer_id=rec["designer_id"],
                embedding=_embed(sketch, encoder), content_hash=rec["content_hash"],
            )
        )
    return index
