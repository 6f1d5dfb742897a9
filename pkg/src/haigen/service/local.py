"""Local role: the trusted studio-side service.

Everything private lives here: the designer's corpus, the sketch library,
uploaded refined sketches, and colored outputs. The only outbound traffic is
the JSON inspiration request, which goes through the audited CloudClient;
cloud artifacts are copied into the local store so later stages never need to
reach out again. The cloud process has no endpoint or credential that can
read anything from this store.
"""

from __future__ import annotations

from pathlib import Path
from typing import Optional

import torch
from fastapi import FastAPI, HTTPException, Request, Response
from pydantic import BaseModel, ConfigDict, Field

from ..diffusion import default_schedule, make_schedule
from ..images import from_png_bytes, to_png_bytes
from ..recommend import ToyVisionEncoder, embed, index_from_library, top_k
from ..sketch import (
    EncoderConfig,
    SketchEncoder,
    SketchGenerator,
    SketchGeneratorConfig,
    build_library,
    compute_style_stats,
)
from ..sketch.encoder import as_rgb
from ..synth import make_designer_corpus, make_shape_pairs
from ..transfer import STMConfig, STMDenoiser, StyleEncoder, transfer
from ..transfer.sampling import ALLOWED_STEPS
from .artifacts import ArtifactError, ArtifactStore
from .audit import AuditLog, verify
from .client import CloudClient, ServiceError
from .config import ServiceConfig
from .jobs import JobError, JobQueue
from .sessions import SessionError, SessionStore


class InspireBody(BaseModel):
    model_config = ConfigDict(extra="forbid")
    session_id: str
    prompt: str
    seed: int = 0
    count: int = Field(default=4, ge=1, le=16)
    adapter_ids: list[str] = Field(default_factory=list)
    control_preset_id: Optional[str] = None


class SelectionBody(BaseModel):
    model_config = ConfigDict(extra="forbid")
    artifact_id: str


class TemplateBody(BaseModel):
    model_config = ConfigDict(extra="forbid")
    template_id: str


class LibraryBuildBody(BaseModel):
    model_config = ConfigDict(extra="forbid")
    corpus_ids: Optional[list[str]] = None
    designer_id: str = "designer"


class RecommendBody(BaseModel):
    model_config = ConfigDict(extra="forbid")
    session_id: str
    artifact_id: str
    k: int = Field(default=3, ge=1, le=32)


class TransferBody(BaseModel):
    model_config = ConfigDict(extra="forbid")
    session_id: str
    sketch_id: str
    reference_id: str
    steps: int = 20
    seed: int = 0


class LocalState:
    """Stores, models, queue, and cloud client behind the local endpoints."""

    def __init__(self, config: ServiceConfig, cloud_client: CloudClient | None = None,
                 audit_log: AuditLog | None = None) -> None:
        self.config = config
        root = config.local_store_path
        self.store = ArtifactStore(root)
        self.sessions = SessionStore(root / "sessions")
        self.audit = audit_log or AuditLog(root / "audit.jsonl")
        self.cloud = cloud_client or CloudClient(config.cloud_url, self.audit)
        self.library_dir = root / "library"
        self.size = config.image_size

        torch.manual_seed(0)
        self.sketch_encoder = SketchEncoder(EncoderConfig())
        self.sketch_generator = SketchGenerator(SketchGeneratorConfig())
        self.vision_encoder = ToyVisionEncoder(image_size=self.size)
        self.stm = STMDenoiser(STMConfig())
        self.style_encoder = StyleEncoder(style_dim=self.stm.cfg.style_dim, seed=1)
        self.schedule = default_schedule()
        self._load_trained_weights()
        self.index = None

        self.queue = JobQueue(
            root / "jobs.jsonl",
            handlers={
                "I2S_BATCH": self._run_library_build,
                "RECOMMEND": self._run_recommend,
                "TRANSFER": self._run_transfer,
            },
            workers=config.workers,
        )
        self.queue.run_pending()

    def _load_trained_weights(self) -> None:
        """Pick up fine-tuned weights when a model directory provides them."""
        model_dir = Path(self.config.model_dir)
        stm_path = model_dir / "stm.pt"
        if stm_path.exists():
            state = torch.load(stm_path, map_location="cpu", weights_only=True)
            self.stm.load_state_dict(state["model"])
            self.style_encoder.load_state_dict(state["style_encoder"])
            self.schedule = make_schedule(**state["schedule"])
        i2s_path = model_dir / "i2s.pt"
        if i2s_path.exists():
            state = torch.load(i2s_path, map_location="cpu", weights_only=True)
            self.sketch_generator.load_state_dict(state["model"])

    # ---- corpus -----------------------------------------------------------

    def ensure_corpus(self, n: int = 12, seed: int = 42) -> list[str]:
        """Seed a deterministic demo corpus on first use; idempotent."""
        existing = [i for i in self.store.ids() if self.store.record(i).kind == "corpus"]
        if existing:
            return sorted(existing)
        images, _ = make_shape_pairs(n, self.size, seed=seed)
        ids = [
            self.store.put(to_png_bytes(img), kind="corpus", meta={"index": i})
            for i, img in enumerate(images)
        ]
        return sorted(ids)

    # ---- job handlers -----------------------------------------------------

    def _run_library_build(self, payload: dict) -> dict:
        corpus_ids = payload.get("corpus_ids") or self.ensure_corpus()
        images = [from_png_bytes(self.store.get(i), channels=3) for i in corpus_ids]
        style_corpus = make_designer_corpus(12, self.size, seed=3)
        stats = compute_style_stats(
            as_rgb(style_corpus),
            self.sketch_encoder,
            designer_id=payload.get("designer_id", "designer"),
        )
        report = build_library(images, stats, self.sketch_generator, self.library_dir)
        self.index = index_from_library(self.library_dir, self.vision_encoder)
        return {
            "generated": report.generated,
            "skipped": report.skipped,
            "entries": [e["id"] for e in report.entries],
            "library_dir": str(self.library_dir),
        }

    def _run_recommend(self, payload: dict) -> dict:
        if self.index is None or len(self.index) == 0:
            if not (self.library_dir / "manifest.jsonl").exists():
                raise JobError("library not built yet")
            self.index = index_from_library(self.library_dir, self.vision_encoder)
        image = from_png_bytes(self.store.get(payload["artifact_id"]))
        query = embed(image, self.vision_encoder)
        ranked = top_k(query, self.index, k=int(payload["k"]))
        candidates = []
        for entry, score in ranked:
            png = (self.library_dir / entry.path).read_bytes()
            template_id = self.store.put(png, kind="template", meta={
                "library_id": entry.id, "designer_id": entry.designer_id,
            })
            candidates.append({
                "template_id": template_id,
                "library_id": entry.id,
                "score": float(score),
            })
        return {"candidates": candidates}

    def _run_transfer(self, payload: dict) -> dict:
        steps = int(payload["steps"])
        if steps not in ALLOWED_STEPS:
            raise JobError(f"steps must be one of {ALLOWED_STEPS}")
        sketch = from_png_bytes(self.store.get(payload["sketch_id"]), channels=1)
        reference = from_png_bytes(self.store.get(payload["reference_id"]), channels=3)
        image, record = transfer(
            sketch, reference, steps=steps, seed=int(payload["seed"]),
            model=self.stm, schedule=self.schedule, style_encoder=self.style_encoder,
        )
        output_id = self.store.put(to_png_bytes(image), kind="transfer", meta=record.to_dict())
        return {"output_id": output_id, "record": record.to_dict()}

    # ---- synchronous job helper -------------------------------------------

    def run_job(self, kind: str, payload: dict) -> dict:
        job = self.queue.submit(kind, payload)
        if self.config.workers == 0:
            self.queue.run_pending()
        else:
            self.queue.wait_idle()
        done = self.queue.get(job.id)
        if done.status == "FAILED":
            raise ServiceError(f"{kind} job failed: {done.error}")
        return {"job_id": job.id, **(done.result or {})}

    # kinds whose partial contents the 64-byte window rule scans for; cloud
    # downloads carry nothing private and outputs stay under the blob rule,
    # so skipping them keeps the audit linear in session count
    _WINDOWED_KINDS = ("corpus", "sketch", "template")

    def sketch_files(self) -> list[Path]:
        """Sketch-like rasters whose contents must never leave the machine."""
        files = sorted(self.library_dir.glob("*.png"))
        for artifact_id in self.store.ids():
            if self.store.record(artifact_id).kind in self._WINDOWED_KINDS:
                files.append(self.store.blob_path(artifact_id))
        return [f for f in files if f.is_file()]

    def audit_report(self) -> dict:
        report = verify(
            self.audit,
            local_store=self.store,
            sketch_files=self.sketch_files(),
            local_roots=[str(self.store.root), str(self.library_dir)],
        )
        return report.to_dict()


def make_local_app(config: ServiceConfig, cloud_client: CloudClient | None = None,
                   audit_log: AuditLog | None = None) -> FastAPI:
    state = LocalState(config, cloud_client=cloud_client, audit_log=audit_log)
    app = FastAPI(title="haigen local", version="1.0")
    app.state.local = state

    def _session(session_id: str):
        try:
            return state.sessions.load(session_id)
        except (KeyError, SessionError) as exc:
            raise HTTPException(status_code=404, detail=str(exc))

    @app.post("/v1/sessions", status_code=201)
    def create_session() -> dict:
        session = state.sessions.create()
        return session.to_dict()

    @app.get("/v1/sessions/{session_id}")
    def get_session(session_id: str) -> dict:
        return _session(session_id).to_dict()

    @app.post("/v1/inspirations")
    def inspire(body: InspireBody) -> dict:
        session = _session(body.session_id)
        try:
            job_id = state.cloud.request_inspirations(
                prompt=body.prompt, seed=body.seed, count=body.count,
                adapter_ids=body.adapter_ids,
                control_preset_id=body.control_preset_id,
                width=state.size, height=state.size,
            )
            result = state.cloud.wait(job_id)
        except ServiceError as exc:
            raise HTTPException(status_code=502, detail=str(exc))
        local_ids = []
        for artifact_id in result["result"]["artifact_ids"]:
            png = state.cloud.fetch_inspiration(artifact_id)
            local_ids.append(state.store.put(png, kind="inspiration", meta={
                "cloud_artifact_id": artifact_id, "prompt": body.prompt,
            }))
        try:
            session.record_prompt(body.prompt)
            session.add_inspirations(local_ids)
        except SessionError as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        state.sessions.save(session)
        return {"session": session.to_dict(), "artifact_ids": local_ids,
                "cloud_job_id": job_id}

    @app.post("/v1/sessions/{session_id}/selection")
    def select_inspiration(session_id: str, body: SelectionBody) -> dict:
        session = _session(session_id)
        try:
            session.select_inspiration(body.artifact_id)
        except SessionError as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        state.sessions.save(session)
        return session.to_dict()

    @app.post("/v1/sessions/{session_id}/template")
    def select_template(session_id: str, body: TemplateBody) -> dict:
        session = _session(session_id)
        try:
            session.select_template(body.template_id)
        except SessionError as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        state.sessions.save(session)
        return session.to_dict()

    @app.post("/v1/sessions/{session_id}/back")
    def jump_back(session_id: str, body: dict) -> dict:
        session = _session(session_id)
        try:
            session.jump_back(str(body.get("target", "")))
        except SessionError as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        state.sessions.save(session)
        return session.to_dict()

    @app.post("/v1/library/build")
    def library_build(body: LibraryBuildBody) -> dict:
        try:
            return state.run_job("I2S_BATCH", body.model_dump())
        except ServiceError as exc:
            raise HTTPException(status_code=500, detail=str(exc))

    @app.post("/v1/recommendations")
    def recommend(body: RecommendBody) -> dict:
        _session(body.session_id)
        try:
            return state.run_job("RECOMMEND", body.model_dump())
        except ServiceError as exc:
            raise HTTPException(status_code=500, detail=str(exc))

    @app.post("/v1/sketches", status_code=201)
    async def upload_sketch(session_id: str, request: Request) -> dict:
        session = _session(session_id)
        png = await request.body()
        if not png:
            raise HTTPException(status_code=400, detail="empty sketch upload")
        try:
            from_png_bytes(png, channels=1)
        except Exception as exc:
            raise HTTPException(status_code=422, detail=f"not a decodable sketch: {exc}")
        artifact_id = state.store.put(png, kind="sketch", meta={"session_id": session_id})
        try:
            session.attach_refined_sketch(artifact_id)
        except SessionError as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        state.sessions.save(session)
        return {"artifact_id": artifact_id, "session": session.to_dict()}

    @app.post("/v1/transfers")
    def request_transfer(body: TransferBody) -> dict:
        session = _session(body.session_id)
        if session.refined_sketch_hash != body.sketch_id:
            raise HTTPException(
                status_code=409,
                detail="transfer must use the session's refined sketch",
            )
        try:
            result = state.run_job("TRANSFER", body.model_dump())
        except ServiceError as exc:
            raise HTTPException(status_code=500, detail=str(exc))
        try:
            session.record_transfer({
                "output_id": result["output_id"], **result["record"],
            })
        except SessionError as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        state.sessions.save(session)
        return {**result, "session": session.to_dict()}

    @app.get("/v1/artifacts/{artifact_id}")
    def get_artifact(artifact_id: str) -> Response:
        try:
            data = state.store.get(artifact_id)
        except KeyError as exc:
            raise HTTPException(status_code=404, detail=str(exc))
        except ArtifactError as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        return Response(content=data, media_type="image/png")

    @app.get("/v1/jobs/{job_id}")
    def get_job(job_id: str) -> dict:
        try:
            return state.queue.get(job_id).to_dict()
        except JobError as exc:
            raise HTTPException(status_code=404, detail=str(exc))

    @app.post("/v1/audit/verify")
    def audit_verify() -> dict:
        return state.audit_report()

    @app.get("/healthz")
    def healthz() -> dict:
        return {"role": "local", "status": "ok"}

    return app
