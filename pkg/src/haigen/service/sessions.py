"""The designer's session state machine.

States run IDEATION -> INSPIRED -> TEMPLATED -> REFINED -> COLORED, one step
forward at a time; jumping back to any earlier state is always legal. An
illegal operation raises and leaves the session untouched. Sessions persist
as one JSON file per id under the store root.
"""

from __future__ import annotations

import json
import threading
import uuid
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path

STATES = ("IDEATION", "INSPIRED", "TEMPLATED", "REFINED", "COLORED")
_INDEX = {s: i for i, s in enumerate(STATES)}


class SessionError(ValueError):
    pass


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


@dataclass
class DesignSession:
    id: str
    state: str = "IDEATION"
    prompts: list[str] = field(default_factory=list)
    inspiration_ids: list[str] = field(default_factory=list)
    selected_inspiration: str | None = None
    selected_template: str | None = None
    refined_sketch_hash: str | None = None
    outputs: list[dict] = field(default_factory=list)
    created_at: str = field(default_factory=_now)
    updated_at: str = field(default_factory=_now)
    transitions: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)

    def _move(self, target: str) -> None:
        if target not in _INDEX:
            raise SessionError(f"unknown state {target!r}")
        cur, new = _INDEX[self.state], _INDEX[target]
        if new > cur + 1:
            raise SessionError(f"cannot skip from {self.state} to {target}")
        if target == "COLORED":
            if self.refined_sketch_hash is None:
                raise SessionError("COLORED requires a refined sketch")
            if self.selected_inspiration is None:
                raise SessionError("COLORED requires a selected inspiration")
        self.transitions.append({"from": self.state, "to": target, "ts": _now()})
        self.state = target
        self.updated_at = _now()

    def record_prompt(self, prompt: str) -> None:
        self.prompts.append(prompt)
        self.updated_at = _now()

    def add_inspirations(self, ids: list[str]) -> None:
        """Downloaded inspiration artifacts move the session to INSPIRED."""
        if not ids:
            raise SessionError("no inspiration ids supplied")
        self.inspiration_ids.extend(ids)
        if self.state == "IDEATION":
            self._move("INSPIRED")
        self.updated_at = _now()

    def select_inspiration(self, artifact_id: str) -> None:
        if artifact_id not in self.inspiration_ids:
            raise SessionError(f"inspiration {artifact_id} not on this session")
        self.selected_inspiration = artifact_id
        self.updated_at = _now()

    def select_template(self, template_id: str) -> None:
        if _INDEX[self.state] < _INDEX["INSPIRED"]:
            raise SessionError("select a template after inspirations arrive")
        self.selected_template = template_id
        if self.state == "INSPIRED":
            self._move("TEMPLATED")
        self.updated_at = _now()

    def attach_refined_sketch(self, sketch_hash: str) -> None:
        if _INDEX[self.state] < _INDEX["TEMPLATED"]:
            raise SessionError("upload a refined sketch after choosing a template")
        self.refined_sketch_hash = sketch_hash
        if self.state == "TEMPLATED":
            self._move("REFINED")
        self.updated_at = _now()

    def record_transfer(self, output: dict) -> None:
        if _INDEX[self.state] < _INDEX["REFINED"]:
            raise SessionError("transfer requires a refined sketch on the session")
        # Move before touching outputs so a rejected transition mutates nothing.
        if self.state == "REFINED":
            self._move("COLORED")
        self.outputs.append(output)
        self.updated_at = _now()

    def jump_back(self, target: str) -> None:
        if target not in _INDEX:
            raise SessionError(f"unknown state {target!r}")
        if _INDEX[target] >= _INDEX[self.state]:
            raise SessionError(f"jump_back must move earlier than {self.state}")
        self.transitions.append({"from": self.state, "to": target, "ts": _now()})
        self.state = target
        self.updated_at = _now()


class SessionStore:
    def __init__(self, root: str | Path) -> None:
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()

    def _path(self, session_id: str) -> Path:
        return self.root / f"{session_id}.json"

    def create(self) -> DesignSession:
        session = DesignSession(id=uuid.uuid4().hex)
        self.save(session)
        return session

    def save(self, session: DesignSession) -> None:
        with self._lock:
            self._path(session.id).write_text(json.dumps(session.to_dict(), indent=2))

    def load(self, session_id: str) -> DesignSession:
        path = self._path(session_id)
        if not path.exists():
            raise KeyError(f"session {session_id} not found")
        raw = json.loads(path.read_text())
        return DesignSession(**raw)
