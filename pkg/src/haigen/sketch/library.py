"""Batch sketch-library generation with a resumable manifest.

Inputs are content-addressed: the library id of a source image is the hash
of its PNG encoding, so re-running over the same corpus regenerates nothing
and new images slot in alongside existing entries. The manifest is
line-delimited JSON, one record per sketch.
"""

from __future__ import annotations

import datetime as _dt
import json
from dataclasses import dataclass, field
from pathlib import Path

import torch

from ..images import content_hash, save_png, to_png_bytes
from .apsn import DesignerStyleStats
from .model import SketchGenerator, generate_sketch


@dataclass
class BuildReport:
    entries: list[dict] = field(default_factory=list)
    generated: int = 0
    skipped: int = 0


def read_manifest(out_dir: str | Path) -> dict[str, dict]:
    path = Path(out_dir) / "manifest.jsonl"
    entries: dict[str, dict] = {}
    if path.exists():
        with open(path, "r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if line:
                    rec = json.loads(line)
                    entries[rec["id"]] = rec
    return entries


def build_library(
    image_corpus: list[torch.Tensor],
    stats: DesignerStyleStats,
    model: SketchGenerator,
    out_dir: str | Path,
    batch_size: int = 8,
) -> BuildReport:
    """Generate one sketch per corpus image under out_dir; append-only manifest."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest_path = out / "manifest.jsonl"
    existing = read_manifest(out)
    report = BuildReport()
    pending: list[tuple[str, torch.Tensor]] = []
    for image in image_corpus:
        if image.dim() == 4:
            if image.shape[0] != 1:
                raise ValueError("corpus entries must be single images")
            image = image[0]
        source_id = content_hash(to_png_bytes(image))
        if source_id in existing and (out / existing[source_id]["path"]).exists():
            report.entries.append(existing[source_id])
            report.skipped += 1
            continue
        pending.append((source_id, image))
    with open(manifest_path, "a", encoding="utf-8") as fh:
        for start in range(0, len(pending), batch_size):
            chunk = pending[start : start + batch_size]
            sketches = generate_sketch(torch.stack([img for _, img in chunk]), stats, model)
            for (source_id, _), sketch in zip(chunk, sketches):
                rel = f"{source_id}.png"
                sketch_hash = save_png(out / rel, sketch)
                record = {
                    "id": source_id,
                    "path": rel,
                    "designer_id": stats.designer_id,
                    "content_hash": sketch_hash,
                    "created_at": _dt.datetime.now(_dt.timezone.utc).isoformat(),
                }
                fh.write(json.dumps(record) + "\n")
                report.entries.append(record)
                report.generated += 1
    return report
