"""Byte-level capture and verification of outbound cloud traffic.

Every request the local side sends to the cloud role is recorded before it
leaves the process: raw body bytes plus, for JSON bodies, the decoded string
values (so content smuggled through JSON escaping is still visible). The
verifier then checks three leak rules against each captured request:

  (a) no blob from the local artifact store appears in the body,
  (b) no 64-byte-or-longer run of any local sketch file appears in the body,
  (c) no local filesystem path string appears in the body.
"""

from __future__ import annotations

import base64
import json
import threading
import uuid
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from .artifacts import ArtifactStore

LEAK_WINDOW = 64


@dataclass(frozen=True)
class CapturedRequest:
    id: str
    ts: str
    method: str
    url: str
    body: bytes
    decoded_values: bytes


@dataclass
class Violation:
    request_id: str
    rule: str
    detail: str


@dataclass
class AuditReport:
    passed: bool
    checked_requests: int
    violations: list[Violation] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "checked_requests": self.checked_requests,
            "violations": [vars(v) for v in self.violations],
        }


def _json_string_values(body: bytes) -> bytes:
    """Concatenate every string value of a JSON body, latin-1 encoded."""
    try:
        doc = json.loads(body.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError):
        return b""
    parts: list[bytes] = []

    def walk(node) -> None:
        if isinstance(node, str):
            parts.append(node.encode("latin-1", errors="replace"))
        elif isinstance(node, dict):
            for v in node.values():
                walk(v)
        elif isinstance(node, list):
            for v in node:
                walk(v)

    walk(doc)
    return b"\x00".join(parts)


class AuditLog:
    """Append-only in-process capture with an on-disk JSONL mirror."""

    def __init__(self, path: str | Path | None = None) -> None:
        self.path = Path(path) if path is not None else None
        self._lock = threading.Lock()
        self._requests: list[CapturedRequest] = []
        if self.path is not None and self.path.exists():
            for line in self.path.read_text().splitlines():
                if not line.strip():
                    continue
                raw = json.loads(line)
                self._requests.append(CapturedRequest(
                    id=raw["id"], ts=raw["ts"], method=raw["method"], url=raw["url"],
                    body=base64.b64decode(raw["body_b64"]),
                    decoded_values=base64.b64decode(raw["decoded_b64"]),
                ))

    def record(self, method: str, url: str, body: bytes) -> CapturedRequest:
        req = CapturedRequest(
            id=uuid.uuid4().hex,
            ts=datetime.now(timezone.utc).isoformat(),
            method=method.upper(),
            url=url,
            body=bytes(body),
            decoded_values=_json_string_values(bytes(body)),
        )
        with self._lock:
            self._requests.append(req)
            if self.path is not None:
                self.path.parent.mkdir(parents=True, exist_ok=True)
                with self.path.open("a") as fh:
                    fh.write(json.dumps({
                        "id": req.id, "ts": req.ts, "method": req.method,
                        "url": req.url,
                        "body_b64": base64.b64encode(req.body).decode("ascii"),
                        "decoded_b64": base64.b64encode(req.decoded_values).decode("ascii"),
                    }) + "\n")
        return req

    def requests(self) -> list[CapturedRequest]:
        with self._lock:
            return list(self._requests)


def _contains_window(haystacks: tuple[bytes, ...], needle: bytes, window: int) -> bool:
    """True when any ``window``-byte run of ``needle`` occurs in a haystack."""
    if len(needle) < window:
        return False
    for start in range(0, len(needle) - window + 1):
        chunk = needle[start:start + window]
        if any(chunk in h for h in haystacks):
            return True
    return False


def verify(
    log: AuditLog,
    local_store: ArtifactStore | None = None,
    sketch_files: list[Path] | None = None,
    local_roots: list[str] | None = None,
) -> AuditReport:
    """Check every captured request against the three leak rules."""
    requests = log.requests()
    violations: list[Violation] = []
    blobs = list(local_store.blobs()) if local_store is not None else []
    sketches: list[tuple[str, bytes]] = []
    for p in sketch_files or []:
        p = Path(p)
        if p.exists():
            sketches.append((str(p), p.read_bytes()))
    roots = [r.encode("utf-8") for r in (local_roots or []) if r]

    for req in requests:
        bodies = (req.body, req.decoded_values, req.url.encode("utf-8", errors="replace"))
        for blob_id, blob in blobs:
            if len(blob) > 0 and any(blob in b for b in bodies):
                violations.append(Violation(
                    request_id=req.id, rule="artifact-blob",
                    detail=f"local artifact {blob_id} found in request to {req.url}",
                ))
        for name, data in sketches:
            if _contains_window(bodies, data, LEAK_WINDOW):
                violations.append(Violation(
                    request_id=req.id, rule="sketch-window",
                    detail=f"{LEAK_WINDOW}-byte run of sketch {name} found in request to {req.url}",
                ))
        for root in roots:
            if any(root in b for b in bodies):
                violations.append(Violation(
                    request_id=req.id, rule="local-path",
                    detail=f"local path {root.decode()} found in request to {req.url}",
                ))
    return AuditReport(
        passed=not violations,
        checked_requests=len(requests),
        violations=violations,
    )
