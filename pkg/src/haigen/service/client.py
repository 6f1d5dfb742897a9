"""HTTP clients for the two service roles.

CloudClient is the only component allowed to talk to the cloud role, and it
records every outbound request byte-for-byte in an audit log before the
request leaves the process. It deliberately has no method that accepts image
bytes: nothing raster can be sent through it.

LocalClient talks to the trusted local service and is the only client with a
raster upload method.
"""

from __future__ import annotations

import json
import time

import httpx

from .audit import AuditLog


class ServiceError(RuntimeError):
    pass


def _check(response: httpx.Response) -> dict:
    if response.status_code >= 400:
        try:
            detail = response.json().get("detail", response.text)
        except (json.JSONDecodeError, ValueError):
            detail = response.text
        raise ServiceError(f"{response.request.method} {response.request.url.path} "
                           f"-> {response.status_code}: {detail}")
    if "application/json" in response.headers.get("content-type", ""):
        return response.json()
    return {}


class CloudClient:
    """Audited JSON-only client for the cloud inspiration service."""

    def __init__(self, base_url: str, audit_log: AuditLog,
                 http: httpx.Client | None = None) -> None:
        self.audit = audit_log
        self._client = http or httpx.Client(base_url=base_url, timeout=120.0)

    def close(self) -> None:
        self._client.close()

    def _send(self, method: str, path: str, payload: dict | None = None) -> httpx.Response:
        body = b""
        headers = {}
        if payload is not None:
            body = json.dumps(payload, sort_keys=True).encode("utf-8")
            headers["content-type"] = "application/json"
        url = str(self._client.base_url.join(path))
        self.audit.record(method, url, body)
        return self._client.request(method, path, content=body or None, headers=headers)

    def request_inspirations(
        self,
        prompt: str,
        seed: int,
        count: int = 4,
        adapter_ids: list[str] | None = None,
        control_preset_id: str | None = None,
        width: int = 64,
        height: int = 64,
    ) -> str:
        """Submit a generation request; returns the cloud job id."""
        payload = {
            "prompt": prompt, "seed": int(seed), "count": int(count),
            "adapter_ids": list(adapter_ids or []),
            "control_preset_id": control_preset_id,
            "width": int(width), "height": int(height),
        }
        return _check(self._send("POST", "/v1/inspirations", payload))["job_id"]

    def job(self, job_id: str) -> dict:
        return _check(self._send("GET", f"/v1/jobs/{job_id}"))

    def wait(self, job_id: str, timeout: float = 120.0, poll: float = 0.05) -> dict:
        """Poll until the job is DONE; raises on FAILED or timeout."""
        deadline = time.monotonic() + timeout
        while True:
            state = self.job(job_id)
            if state["status"] == "DONE":
                return state
            if state["status"] == "FAILED":
                raise ServiceError(f"cloud job {job_id} failed: {state.get('error')}")
            if time.monotonic() > deadline:
                raise ServiceError(f"cloud job {job_id} still {state['status']} after {timeout}s")
            time.sleep(poll)

    def fetch_inspiration(self, artifact_id: str) -> bytes:
        resp = self._send("GET", f"/v1/inspirations/{artifact_id}")
        if resp.status_code >= 400:
            _check(resp)
        return resp.content

    def registries(self) -> dict:
        return _check(self._send("GET", "/v1/adapters"))


class LocalClient:
    """Client for the local studio service; the only one that uploads rasters."""

    def __init__(self, base_url: str, http: httpx.Client | None = None) -> None:
        self._client = http or httpx.Client(base_url=base_url, timeout=600.0)

    def close(self) -> None:
        self._client.close()

    def create_session(self) -> dict:
        return _check(self._client.post("/v1/sessions"))

    def session(self, session_id: str) -> dict:
        return _check(self._client.get(f"/v1/sessions/{session_id}"))

    def inspire(self, session_id: str, prompt: str, seed: int, count: int = 4,
                adapter_ids: list[str] | None = None,
                control_preset_id: str | None = None) -> dict:
        return _check(self._client.post("/v1/inspirations", json={
            "session_id": session_id, "prompt": prompt, "seed": int(seed),
            "count": int(count), "adapter_ids": list(adapter_ids or []),
            "control_preset_id": control_preset_id,
        }))

    def select_inspiration(self, session_id: str, artifact_id: str) -> dict:
        return _check(self._client.post(
            f"/v1/sessions/{session_id}/selection", json={"artifact_id": artifact_id}))

    def select_template(self, session_id: str, template_id: str) -> dict:
        return _check(self._client.post(
            f"/v1/sessions/{session_id}/template", json={"template_id": template_id}))

    def jump_back(self, session_id: str, target: str) -> dict:
        return _check(self._client.post(
            f"/v1/sessions/{session_id}/back", json={"target": target}))

    def build_library(self, corpus_ids: list[str] | None = None,
                      designer_id: str = "designer") -> dict:
        return _check(self._client.post("/v1/library/build", json={
            "corpus_ids": corpus_ids, "designer_id": designer_id,
        }))

    def recommend(self, session_id: str, artifact_id: str, k: int = 3) -> dict:
        return _check(self._client.post("/v1/recommendations", json={
            "session_id": session_id, "artifact_id": artifact_id, "k": int(k),
        }))

    def upload_sketch(self, session_id: str, png: bytes) -> dict:
        """Raster upload: refined sketch PNG straight to the local store."""
        return _check(self._client.post(
            "/v1/sketches", params={"session_id": session_id},
            content=png, headers={"content-type": "image/png"},
        ))

    def request_transfer(self, session_id: str, sketch_id: str, reference_id: str,
                         steps: int = 20, seed: int = 0) -> dict:
        return _check(self._client.post("/v1/transfers", json={
            "session_id": session_id, "sketch_id": sketch_id,
            "reference_id": reference_id, "steps": int(steps), "seed": int(seed),
        }))

    def fetch_artifact(self, artifact_id: str) -> bytes:
        resp = self._client.get(f"/v1/artifacts/{artifact_id}")
        if resp.status_code >= 400:
            _check(resp)
        return resp.content

    def audit_report(self) -> dict:
        return _check(self._client.post("/v1/audit/verify"))
