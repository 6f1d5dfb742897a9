from .config import ConfigError, ServiceConfig, load_config
from .artifacts import ArtifactError, ArtifactRecord, ArtifactStore, blob_hash
from .jobs import JOB_KINDS, Job, JobError, JobQueue
from .sessions import STATES, DesignSession, SessionError, SessionStore
from .schema import CloudRequest, MAX_PROMPT_BYTES
from .audit import AuditLog, AuditReport, CapturedRequest, Violation, verify
from .cloudgen import CloudGenerator, GenerationError
from .client import CloudClient, LocalClient, ServiceError
from .pipeline import PipelineResult, make_clients, run_pipeline, seed_demo_corpus

__all__ = [
    "ConfigError", "ServiceConfig", "load_config",
    "ArtifactError", "ArtifactRecord", "ArtifactStore", "blob_hash",
    "JOB_KINDS", "Job", "JobError", "JobQueue",
    "STATES", "DesignSession", "SessionError", "SessionStore",
    "CloudRequest", "MAX_PROMPT_BYTES",
    "AuditLog", "AuditReport", "CapturedRequest", "Violation", "verify",
    "CloudGenerator", "GenerationError",
    "CloudClient", "LocalClient", "ServiceError",
    "PipelineResult", "make_clients", "run_pipeline", "seed_demo_corpus",
]
