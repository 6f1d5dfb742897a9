"""Closed wire schema for requests that cross the privacy boundary.

The cloud request can carry text, short identifier slugs, and integers; no
field type can hold image bytes or local file paths. Unknown fields are
rejected outright.
"""

from __future__ import annotations

import re

from pydantic import BaseModel, ConfigDict, Field, field_validator

MAX_PROMPT_BYTES = 1024
_SLUG = re.compile(r"^[a-z0-9][a-z0-9-]{0,62}$")


class CloudRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    prompt: str = Field(min_length=1)
    adapter_ids: list[str] = Field(default_factory=list, max_length=8)
    control_preset_id: str | None = None
    width: int = Field(default=64, ge=16, le=1024)
    height: int = Field(default=64, ge=16, le=1024)
    seed: int = Field(default=0, ge=0, lt=2**64)
    count: int = Field(default=1, ge=1, le=16)

    @field_validator("prompt")
    @classmethod
    def _prompt_size(cls, v: str) -> str:
        if len(v.encode("utf-8")) > MAX_PROMPT_BYTES:
            raise ValueError(f"prompt exceeds {MAX_PROMPT_BYTES} bytes")
        return v

    @field_validator("adapter_ids")
    @classmethod
    def _adapter_slugs(cls, v: list[str]) -> list[str]:
        for item in v:
            if not _SLUG.match(item):
                raise ValueError(f"adapter id {item!r} is not a valid slug")
        return v

    @field_validator("control_preset_id")
    @classmethod
    def _preset_slug(cls, v: str | None) -> str | None:
        if v is not None and not _SLUG.match(v):
            raise ValueError(f"control preset id {v!r} is not a valid slug")
        return v
