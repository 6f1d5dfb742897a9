"""Command-line entry points for the design services.

`haigen serve --role cloud|local` runs one role as an HTTP process; the
other verbs drive a running (or freshly spun-up in-process) deployment
through the same clients the UI uses.
"""

from __future__ import annotations

import json
import os
import sys
from pathlib import Path

import click

from .audit import AuditLog, verify
from .artifacts import ArtifactStore
from .client import CloudClient, LocalClient, ServiceError
from .config import ServiceConfig, load_config
from .pipeline import make_clients, run_pipeline


def _config(path: str | None) -> ServiceConfig:
    return load_config(path, env=dict(os.environ))


def _local_client(cfg: ServiceConfig, in_process: bool) -> LocalClient:
    if in_process:
        _, local, _ = make_clients(cfg)
        return local
    return LocalClient(f"http://127.0.0.1:{cfg.local_port}")


@click.group()
@click.option("--config", "config_path", default=None, type=click.Path(),
              help="JSON config file; HAIGEN_* env vars override fields.")
@click.pass_context
def main(ctx: click.Context, config_path: str | None) -> None:
    """Desk-scale cloud/local fashion design pipeline."""
    ctx.obj = _config(config_path)


@main.command()
@click.option("--role", type=click.Choice(["cloud", "local"]), required=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.pass_obj
def serve(cfg: ServiceConfig, role: str, host: str) -> None:
    """Run one service role as an HTTP process."""
    import uvicorn

    if role == "cloud":
        from .cloud import make_cloud_app

        uvicorn.run(make_cloud_app(cfg), host=host, port=cfg.cloud_port)
    else:
        from .local import make_local_app

        uvicorn.run(make_local_app(cfg), host=host, port=cfg.local_port)


@main.command()
@click.option("--prompt", required=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--count", default=4, show_default=True)
@click.option("--adapter", "adapters", multiple=True, help="Adapter slug; repeatable.")
@click.option("--preset", default=None, help="Control preset slug.")
@click.option("--session", "session_id", default=None,
              help="Existing session id; a new session is created otherwise.")
@click.option("--in-process", is_flag=True, help="Run against in-process services.")
@click.pass_obj
def inspire(cfg: ServiceConfig, prompt: str, seed: int, count: int,
            adapters: tuple[str, ...], preset: str | None,
            session_id: str | None, in_process: bool) -> None:
    """Request cloud inspirations into a session."""
    local = _local_client(cfg, in_process)
    try:
        if session_id is None:
            session_id = local.create_session()["id"]
        out = local.inspire(session_id, prompt, seed=seed, count=count,
                            adapter_ids=list(adapters), control_preset_id=preset)
        click.echo(json.dumps(out, indent=2))
    except ServiceError as exc:
        raise click.ClickException(str(exc))
    finally:
        local.close()


@main.group()
def library() -> None:
    """Sketch library maintenance."""


@library.command("build")
@click.option("--designer", default="designer", show_default=True)
@click.option("--in-process", is_flag=True)
@click.pass_obj
def library_build(cfg: ServiceConfig, designer: str, in_process: bool) -> None:
    """Generate one sketch per corpus image and refresh the index."""
    local = _local_client(cfg, in_process)
    try:
        out = local.build_library(designer_id=designer)
        click.echo(json.dumps(out, indent=2))
    except ServiceError as exc:
        raise click.ClickException(str(exc))
    finally:
        local.close()


@main.command()
@click.option("--session", "session_id", required=True)
@click.option("--artifact", "artifact_id", required=True,
              help="Local artifact id to match against the library.")
@click.option("--k", default=3, show_default=True)
@click.option("--in-process", is_flag=True)
@click.pass_obj
def recommend(cfg: ServiceConfig, session_id: str, artifact_id: str,
              k: int, in_process: bool) -> None:
    """Rank library sketches against an inspiration image."""
    local = _local_client(cfg, in_process)
    try:
        out = local.recommend(session_id, artifact_id, k=k)
        click.echo(json.dumps(out, indent=2))
    except ServiceError as exc:
        raise click.ClickException(str(exc))
    finally:
        local.close()


@main.command()
@click.option("--session", "session_id", required=True)
@click.option("--sketch", "sketch_id", required=True)
@click.option("--reference", "reference_id", required=True)
@click.option("--steps", default=20, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--out", "out_path", default=None, type=click.Path(),
              help="Also write the colored PNG here.")
@click.option("--in-process", is_flag=True)
@click.pass_obj
def transfer(cfg: ServiceConfig, session_id: str, sketch_id: str, reference_id: str,
             steps: int, seed: int, out_path: str | None, in_process: bool) -> None:
    """Color the session's refined sketch in a reference image's style."""
    local = _local_client(cfg, in_process)
    try:
        out = local.request_transfer(session_id, sketch_id, reference_id,
                                     steps=steps, seed=seed)
        if out_path:
            Path(out_path).write_bytes(local.fetch_artifact(out["output_id"]))
            out["saved_to"] = out_path
        click.echo(json.dumps(out, indent=2))
    except ServiceError as exc:
        raise click.ClickException(str(exc))
    finally:
        local.close()


@main.command()
@click.pass_obj
def audit(cfg: ServiceConfig) -> None:
    """Verify the outbound-traffic log against the local store. Exit 1 on FAIL."""
    log = AuditLog(cfg.local_store_path / "audit.jsonl")
    store = ArtifactStore(cfg.local_store_path)
    library_dir = cfg.local_store_path / "library"
    sketch_files = sorted(library_dir.glob("*.png")) if library_dir.exists() else []
    report = verify(
        log, local_store=store, sketch_files=sketch_files,
        local_roots=[str(cfg.local_store_path), str(library_dir)],
    )
    click.echo(json.dumps(report.to_dict(), indent=2))
    if not report.passed:
        sys.exit(1)


@main.command("eval")
@click.option("--trials", default=4, show_default=True)
@click.option("--steps", default=20, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.pass_obj
def eval_cmd(cfg: ServiceConfig, trials: int, steps: int, seed: int) -> None:
    """Image-quality metrics for seeded transfer runs (in-process)."""
    import torch

    from ..metrics import mse, psnr, ssim
    from ..synth import make_shape_pairs, recolor, GRID_COLORS
    from ..transfer import STMConfig, STMDenoiser, StyleEncoder
    from ..transfer.sampling import transfer as run_transfer
    from ..diffusion import default_schedule

    torch.manual_seed(seed)
    images, sketches = make_shape_pairs(max(trials, 2), cfg.image_size, seed=seed)
    model = STMDenoiser(STMConfig())
    style_encoder = StyleEncoder(style_dim=model.cfg.style_dim, seed=1)
    schedule = default_schedule()
    model_dir = Path(cfg.model_dir)
    if (model_dir / "stm.pt").exists():
        state = torch.load(model_dir / "stm.pt", map_location="cpu", weights_only=True)
        model.load_state_dict(state["model"])
        style_encoder.load_state_dict(state["style_encoder"])
        from ..diffusion import make_schedule

        schedule = make_schedule(**state["schedule"])
    rows = []
    for i in range(trials):
        reference = recolor(images[i], GRID_COLORS[i % len(GRID_COLORS)])
        out, record = run_transfer(
            sketches[i], reference, steps=steps, seed=seed + i,
            model=model, schedule=schedule, style_encoder=style_encoder,
        )
        rows.append({
            "trial": i,
            "psnr_vs_reference": float(psnr(out, reference)),
            "ssim_vs_reference": float(ssim(out, reference)),
            "mse_vs_reference": float(mse(out, reference)),
            "seed": record.seed,
        })
    click.echo(json.dumps({"steps": steps, "rows": rows}, indent=2))


if __name__ == "__main__":
    main()
