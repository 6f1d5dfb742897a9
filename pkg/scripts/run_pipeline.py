"""One full design loop against in-process services.

Spins up the cloud and local roles in one process, walks a session from
ideation to a colored output, and prints the resulting state, artifact ids,
and the outbound-traffic audit report.
"""

import argparse
import json
from pathlib import Path

import torch

from haigen.service import ServiceConfig, run_pipeline

PROMPT = "flowing summer dress, botanical print"


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--prompt", default=PROMPT)
    parser.add_argument("--seed", type=int, default=7)
    parser.add_argument("--steps", type=int, default=20, choices=(20, 50, 100, 200))
    parser.add_argument("--run-dir", type=Path, default=Path("run"))
    args = parser.parse_args()

    torch.set_num_threads(1)
    cfg = ServiceConfig(
        cloud_store_root=str(args.run_dir / "cloud-store"),
        local_store_root=str(args.run_dir / "local-store"),
        model_dir=str(args.run_dir / "models"),
    )
    result = run_pipeline(cfg, prompt=args.prompt, seed=args.seed, steps=args.steps)
    print(json.dumps({
        "state": result.session["state"],
        "transitions": [t["to"] for t in result.session["transitions"]],
        "inspiration_ids": result.inspiration_ids,
        "template_candidates": result.template_candidates,
        "sketch_id": result.sketch_id,
        "output_id": result.output_id,
        "audit": result.audit_report,
    }, indent=2))


if __name__ == "__main__":
    main()
