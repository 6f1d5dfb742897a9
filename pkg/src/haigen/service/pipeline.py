"""Scripted end-to-end run: ideation through colored output.

Drives both roles exactly the way the studio UI would: the cloud app only
ever sees audited JSON requests, and every raster stays on the local side.
Returns the finished session state plus the privacy audit report, so callers
can assert both the workflow outcome and the no-leak guarantee in one shot.
"""

from __future__ import annotations

from dataclasses import dataclass

import httpx

from ..images import from_png_bytes, to_png_bytes
from ..synth import make_shape_pairs
from .audit import AuditLog
from .client import CloudClient, LocalClient
from .cloud import make_cloud_app
from .config import ServiceConfig
from .local import make_local_app


@dataclass
class PipelineResult:
    session: dict
    inspiration_ids: list[str]
    template_candidates: list[dict]
    sketch_id: str
    output_id: str
    audit_report: dict


def make_clients(config: ServiceConfig) -> tuple[CloudClient, LocalClient, AuditLog]:
    """In-process client pair wired through sync-over-ASGI test transports."""
    from starlette.testclient import TestClient

    audit = AuditLog(config.local_store_path / "audit.jsonl")
    cloud_app = make_cloud_app(config)
    cloud_client = CloudClient(
        config.cloud_url, audit, http=TestClient(cloud_app, base_url=config.cloud_url))
    local_app = make_local_app(config, cloud_client=cloud_client, audit_log=audit)
    local_client = LocalClient(
        "http://local.test", http=TestClient(local_app, base_url="http://local.test"))
    return cloud_client, local_client, audit


def run_pipeline(
    config: ServiceConfig,
    prompt: str = "flowing summer dress, botanical print",
    seed: int = 7,
    steps: int = 20,
    local: LocalClient | None = None,
) -> PipelineResult:
    """One full design loop; builds in-process services unless one is given."""
    owned = local is None
    if owned:
        _, local, _ = make_clients(config)
    try:
        session = local.create_session()
        sid = session["id"]

        inspired = local.inspire(sid, prompt, seed=seed, count=4,
                                 adapter_ids=["bold-lines"])
        inspiration_ids = inspired["artifact_ids"]
        local.select_inspiration(sid, inspiration_ids[0])

        local.build_library()
        recs = local.recommend(sid, inspiration_ids[0], k=3)
        candidates = recs["candidates"]
        local.select_template(sid, candidates[0]["template_id"])

        # The refined sketch stands in for the designer's manual edit pass:
        # take the chosen template and nudge it before re-uploading.
        template_png = local.fetch_artifact(candidates[0]["template_id"])
        sketch = from_png_bytes(template_png, channels=1)
        refined = (sketch * 0.98).clamp(0.0, 1.0)
        uploaded = local.upload_sketch(sid, to_png_bytes(refined))
        sketch_id = uploaded["artifact_id"]

        transferred = local.request_transfer(
            sid, sketch_id, inspiration_ids[0], steps=steps, seed=seed)
        output_id = transferred["output_id"]

        return PipelineResult(
            session=local.session(sid),
            inspiration_ids=inspiration_ids,
            template_candidates=candidates,
            sketch_id=sketch_id,
            output_id=output_id,
            audit_report=local.audit_report(),
        )
    finally:
        if owned:
            local.close()


def seed_demo_corpus(config: ServiceConfig, n: int = 12, seed: int = 42) -> list[str]:
    """Drop a deterministic corpus into the local store for standalone runs."""
    from .artifacts import ArtifactStore

    store = ArtifactStore(config.local_store_path)
    images, _ = make_shape_pairs(n, config.image_size, seed=seed)
    return [store.put(to_png_bytes(img), kind="corpus", meta={"index": i})
            for i, img in enumerate(images)]
