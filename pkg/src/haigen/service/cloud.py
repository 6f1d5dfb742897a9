"""Cloud role: text-to-image inspiration service.

The cloud process owns its own artifact store and job log under the
configured cloud storage root. It never receives raster uploads; the only
write path is the JSON inspiration request, validated against a closed
schema before any model work happens.
"""

from __future__ import annotations

from fastapi import FastAPI, HTTPException, Response

from .artifacts import ArtifactError, ArtifactStore
from .cloudgen import CloudGenerator, GenerationError
from .config import ServiceConfig
from .jobs import JobError, JobQueue
from .schema import CloudRequest


class CloudState:
    """Generator, store, and queue shared by the cloud endpoints."""

    def __init__(self, config: ServiceConfig, generator: CloudGenerator | None = None):
        self.config = config
        self.generator = generator or CloudGenerator(image_size=config.image_size)
        self.store = ArtifactStore(config.cloud_store_path)
        self.queue = JobQueue(
            config.cloud_store_path / "jobs.jsonl",
            handlers={"T2IM": self._run_t2im},
            workers=config.workers,
        )
        # Jobs replayed from a previous run are finished before serving.
        self.queue.run_pending()

    def _run_t2im(self, payload: dict) -> dict:
        req = CloudRequest(**payload)
        artifact_ids = []
        for png, meta in self.generator.generate(req):
            artifact_ids.append(self.store.put(png, kind="inspiration", meta=meta))
        return {"artifact_ids": artifact_ids}

    def submit(self, req: CloudRequest) -> str:
        # Registry membership is checked here, before the job ever runs.
        self.generator._check_registries(req)
        job = self.queue.submit("T2IM", req.model_dump())
        if self.config.workers == 0:
            self.queue.run_pending()
        return job.id


def make_cloud_app(config: ServiceConfig, generator: CloudGenerator | None = None) -> FastAPI:
    state = CloudState(config, generator)
    app = FastAPI(title="haigen cloud", version="1.0")
    app.state.cloud = state

    @app.post("/v1/inspirations", status_code=202)
    def create_inspirations(req: CloudRequest) -> dict:
        try:
            job_id = state.submit(req)
        except GenerationError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        return {"job_id": job_id}

    @app.get("/v1/jobs/{job_id}")
    def get_job(job_id: str) -> dict:
        try:
            return state.queue.get(job_id).to_dict()
        except JobError as exc:
            raise HTTPException(status_code=404, detail=str(exc))

    @app.get("/v1/inspirations/{artifact_id}")
    def get_inspiration(artifact_id: str) -> Response:
        try:
            data = state.store.get(artifact_id)
        except KeyError as exc:
            raise HTTPException(status_code=404, detail=str(exc))
        except ArtifactError as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        return Response(content=data, media_type="image/png")

    @app.get("/v1/adapters")
    def get_adapters() -> dict:
        return {
            "adapter_ids": state.generator.available_adapters(),
            "control_preset_ids": state.generator.available_presets(),
        }

    @app.get("/healthz")
    def healthz() -> dict:
        return {"role": "cloud", "status": "ok"}

    return app
