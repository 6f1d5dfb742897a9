"""Durable job queue over an append-only JSONL event log.

Every state change is one appended event; restart replays the log. Jobs move
QUEUED -> RUNNING -> DONE or FAILED, never backwards, and a finished job is
never re-executed (exactly-once in the result log). Execution is synchronous
through ``run_pending`` when ``workers`` is 0, or through a bounded thread
pool otherwise.
"""

from __future__ import annotations

import json
import threading
import uuid
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable

JOB_KINDS = ("T2IM", "I2S_BATCH", "RECOMMEND", "TRANSFER")


class JobError(ValueError):
    pass


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


@dataclass
class Job:
    id: str
    kind: str
    payload: dict
    status: str = "QUEUED"
    result: dict | None = None
    error: str | None = None
    created_at: str = field(default_factory=_now)
    updated_at: str = field(default_factory=_now)

    def to_dict(self) -> dict:
        return {
            "id": self.id, "kind": self.kind, "payload": self.payload,
            "status": self.status, "result": self.result, "error": self.error,
            "created_at": self.created_at, "updated_at": self.updated_at,
        }


class JobQueue:
    def __init__(
        self,
        log_path: str | Path,
        handlers: dict[str, Callable[[dict], dict]] | None = None,
        workers: int = 0,
    ) -> None:
        self.log_path = Path(log_path)
        self.log_path.parent.mkdir(parents=True, exist_ok=True)
        self.handlers = dict(handlers or {})
        self.workers = int(workers)
        self._jobs: dict[str, Job] = {}
        self._order: list[str] = []
        self._lock = threading.Lock()
        self._pool = ThreadPoolExecutor(max_workers=workers) if workers > 0 else None
        self._replay()

    def _replay(self) -> None:
        if not self.log_path.exists():
            return
        for line in self.log_path.read_text().splitlines():
            if not line.strip():
                continue
            ev = json.loads(line)
            jid = ev["job_id"]
            if ev["event"] == "QUEUED":
                job = Job(id=jid, kind=ev["kind"], payload=ev["payload"],
                          created_at=ev["ts"], updated_at=ev["ts"])
                self._jobs[jid] = job
                self._order.append(jid)
            elif ev["event"] in ("RUNNING", "DONE", "FAILED"):
                if jid not in self._jobs:
                    raise JobError(f"corrupt job log: event for unknown job {jid}")
                job = self._jobs[jid]
                job.status = ev["event"]
                job.result = ev.get("result")
                job.error = ev.get("error")
                job.updated_at = ev["ts"]
            else:
                raise JobError(f"corrupt job log: unknown event {ev['event']!r}")
        # A job caught mid-run by a crash is re-queued on restart (at-least-once).
        for job in self._jobs.values():
            if job.status == "RUNNING":
                job.status = "QUEUED"

    def _append(self, event: dict) -> None:
        with self.log_path.open("a") as fh:
            fh.write(json.dumps(event) + "\n")

    def submit(self, kind: str, payload: dict) -> Job:
        if kind not in JOB_KINDS:
            raise JobError(f"unknown job kind {kind!r}; expected one of {JOB_KINDS}")
        if kind not in self.handlers:
            raise JobError(f"no handler registered for job kind {kind!r}")
        job = Job(id=uuid.uuid4().hex, kind=kind, payload=payload)
        with self._lock:
            self._jobs[job.id] = job
            self._order.append(job.id)
            self._append({"event": "QUEUED", "job_id": job.id, "kind": kind,
                          "payload": payload, "ts": job.created_at})
        if self._pool is not None:
            self._pool.submit(self._execute, job.id)
        return job

    def get(self, job_id: str) -> Job:
        if job_id not in self._jobs:
            raise JobError(f"job {job_id} not found")
        return self._jobs[job_id]

    _LEGAL = {("QUEUED", "RUNNING"), ("RUNNING", "DONE"), ("RUNNING", "FAILED")}

    def _transition(self, job: Job, status: str, **extra) -> None:
        if (job.status, status) not in self._LEGAL:
            raise JobError(f"illegal transition {job.status} -> {status}")
        job.status = status
        job.updated_at = _now()
        self._append({"event": status, "job_id": job.id, "ts": job.updated_at, **extra})

    def _execute(self, job_id: str) -> None:
        with self._lock:
            job = self._jobs[job_id]
            if job.status != "QUEUED":
                return
            self._transition(job, "RUNNING")
        try:
            result = self.handlers[job.kind](job.payload)
        except Exception as exc:  # noqa: BLE001 - job failures become FAILED records
            with self._lock:
                job.error = f"{type(exc).__name__}: {exc}"
                self._transition(job, "FAILED", error=job.error)
            return
        with self._lock:
            job.result = result
            self._transition(job, "DONE", result=result)

    def run_pending(self) -> int:
        """Execute queued jobs on the calling thread; returns how many ran."""
        ran = 0
        while True:
            with self._lock:
                pending = [j for j in self._order if self._jobs[j].status == "QUEUED"]
            if not pending:
                return ran
            self._execute(pending[0])
            ran += 1

    def wait_idle(self) -> None:
        if self._pool is not None:
            self._pool.shutdown(wait=True)
            self._pool = ThreadPoolExecutor(max_workers=self.workers)

    def jobs(self) -> list[Job]:
        return [self._jobs[j] for j in self._order]
