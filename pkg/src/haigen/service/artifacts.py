"""Content-addressed, immutable artifact storage.

Blobs live under ``root/objects/<first two hash chars>/<hash>``; metadata is
an append-only JSONL file. A hash can never be re-bound to different bytes,
and every read re-hashes the file so silent corruption surfaces as an error.
"""

from __future__ import annotations

import hashlib
import json
import threading
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path


class ArtifactError(ValueError):
    pass


def blob_hash(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


@dataclass(frozen=True)
class ArtifactRecord:
    id: str
    kind: str
    size: int
    created_at: str
    meta: dict


class ArtifactStore:
    def __init__(self, root: str | Path) -> None:
        self.root = Path(root)
        (self.root / "objects").mkdir(parents=True, exist_ok=True)
        self._manifest = self.root / "manifest.jsonl"
        self._lock = threading.Lock()
        self._records: dict[str, ArtifactRecord] = {}
        if self._manifest.exists():
            for line in self._manifest.read_text().splitlines():
                if not line.strip():
                    continue
                raw = json.loads(line)
                rec = ArtifactRecord(
                    id=raw["id"], kind=raw["kind"], size=raw["size"],
                    created_at=raw["created_at"], meta=raw.get("meta", {}),
                )
                self._records[rec.id] = rec

    def _blob_path(self, artifact_id: str) -> Path:
        return self.root / "objects" / artifact_id[:2] / artifact_id

    def blob_path(self, artifact_id: str) -> Path:
        """Filesystem location of a stored blob, for read-only consumers."""
        return self._blob_path(artifact_id)

    def put(self, data: bytes, kind: str = "blob", meta: dict | None = None) -> str:
        """Store bytes, returning the content hash. Idempotent for equal bytes."""
        if not isinstance(data, bytes) or len(data) == 0:
            raise ArtifactError("artifact payload must be non-empty bytes")
        artifact_id = blob_hash(data)
        with self._lock:
            path = self._blob_path(artifact_id)
            if path.exists():
                if path.read_bytes() != data:
                    raise ArtifactError(
                        f"hash {artifact_id} already bound to different bytes"
                    )
                return artifact_id
            path.parent.mkdir(parents=True, exist_ok=True)
            tmp = path.with_suffix(".tmp")
            tmp.write_bytes(data)
            tmp.rename(path)
            rec = ArtifactRecord(
                id=artifact_id, kind=kind, size=len(data),
                created_at=datetime.now(timezone.utc).isoformat(),
                meta=dict(meta or {}),
            )
            self._records[artifact_id] = rec
            with self._manifest.open("a") as fh:
                fh.write(json.dumps({
                    "id": rec.id, "kind": rec.kind, "size": rec.size,
                    "created_at": rec.created_at, "meta": rec.meta,
                }) + "\n")
        return artifact_id

    def get(self, artifact_id: str) -> bytes:
        path = self._blob_path(artifact_id)
        if not path.exists():
            raise KeyError(f"artifact {artifact_id} not found")
        data = path.read_bytes()
        if blob_hash(data) != artifact_id:
            raise ArtifactError(f"artifact {artifact_id} failed hash verification")
        return data

    def exists(self, artifact_id: str) -> bool:
        return self._blob_path(artifact_id).exists()

    def record(self, artifact_id: str) -> ArtifactRecord:
        if artifact_id not in self._records:
            raise KeyError(f"artifact {artifact_id} has no metadata record")
        return self._records[artifact_id]

    def ids(self) -> list[str]:
        return sorted(self._records)

    def blobs(self):
        """Iterate (id, bytes) over every stored blob."""
        for artifact_id in self.ids():
            yield artifact_id, self.get(artifact_id)
