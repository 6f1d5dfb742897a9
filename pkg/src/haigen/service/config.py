"""Service configuration: JSON file plus environment overrides.

Two roles share one binary; each role gets its own port and storage root so
the cloud process never holds a handle into the local store.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, fields
from pathlib import Path


class ConfigError(ValueError):
    pass


_ENV_PREFIX = "HAIGEN_"


@dataclass
class ServiceConfig:
    cloud_port: int = 8801
    local_port: int = 8802
    cloud_store_root: str = "run/cloud-store"
    local_store_root: str = "run/local-store"
    model_dir: str = "run/models"
    workers: int = 0
    cloud_url: str = "http://127.0.0.1:8801"
    image_size: int = 64
    extra: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        for name in ("cloud_port", "local_port", "workers", "image_size"):
            value = getattr(self, name)
            if not isinstance(value, int) or value < 0:
                raise ConfigError(f"{name} must be a non-negative integer, got {value!r}")
        if Path(self.cloud_store_root).resolve() == Path(self.local_store_root).resolve():
            raise ConfigError("cloud and local storage roots must be distinct")

    @property
    def cloud_store_path(self) -> Path:
        return Path(self.cloud_store_root)

    @property
    def local_store_path(self) -> Path:
        return Path(self.local_store_root)


def _coerce(name: str, raw: str, kind: type):
    if kind is int:
        try:
            return int(raw)
        except ValueError as exc:
            raise ConfigError(f"environment override {name} is not an integer: {raw!r}") from exc
    return raw


def load_config(path: str | Path | None = None, env: dict | None = None) -> ServiceConfig:
    """Read the JSON config file, then apply HAIGEN_* environment overrides."""
    data: dict = {}
    if path is not None:
        p = Path(path)
        if not p.exists():
            raise ConfigError(f"config file not found: {p}")
        try:
            data = json.loads(p.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {p} is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError(f"config file {p} must hold a JSON object")
    env = dict(os.environ if env is None else env)
    known = {f.name: f.type for f in fields(ServiceConfig) if f.name != "extra"}
    kinds = {"cloud_port": int, "local_port": int, "workers": int, "image_size": int}
    merged = {k: v for k, v in data.items() if k in known}
    extra = {k: v for k, v in data.items() if k not in known}
    for name in known:
        env_key = _ENV_PREFIX + name.upper()
        if env_key in env:
            merged[name] = _coerce(env_key, env[env_key], kinds.get(name, str))
    return ServiceConfig(**merged, extra=extra)
