"""Short CPU fine-tune of the sketch coloring model on a factorial toy corpus.

Trains on 16 (geometry, fill color) pairs where every outline appears with
every fill, so the model can only resolve color through its style input.
Afterwards runs two behavioral probes through the production sampler:

  * structure: edge IoU of the output against the conditioning sketch must
    beat the IoU against a different geometry's sketch
  * style: the output's region hue must sit closer to the reference fill
    than to a control fill of another hue

Saves weights plus the schedule under --out for the local service to load.
"""

import argparse
import itertools
import time
from pathlib import Path

import torch

from haigen.diffusion import make_schedule
from haigen.synth import (
    GRID_COLORS, edge_iou, edge_map, make_grid_pairs, mean_hue, recolor, region_hue,
)
from haigen.transfer import STMConfig, STMDenoiser, StyleEncoder, STMTrainer, transfer

T = 100
ALPHA_END = 0.10
LR = 1e-3
BATCH_SIZE = 8
TRAIN_STEPS = 2500
SAMPLE_STEPS = 20
TRIALS = 20


def structure_trials(model, style_encoder, schedule, images, sketches, trials):
    """Output edges should match the conditioning sketch, not a shuffled one."""
    wins = 0
    for trial in range(trials):
        i = trial % 16
        j = (i + 5) % 16  # different geometry, different color
        out, _ = transfer(sketches[i:i + 1], images[i:i + 1], steps=SAMPLE_STEPS,
                          seed=300 + trial, model=model, schedule=schedule,
                          style_encoder=style_encoder)
        edges = edge_map(out)
        matched = edge_iou(edges, ~(sketches[i, 0] > 0.5))
        shuffled = edge_iou(edges, ~(sketches[j, 0] > 0.5))
        wins += int(matched > shuffled)
    return wins


def style_trials(model, style_encoder, schedule, images, sketches, masks, trials):
    """Swapping the reference fill must reorder the output's region hue."""
    color_pairs = list(itertools.combinations(range(4), 2))
    wins = 0
    for trial in range(trials):
        i = trial % 16
        a, b = color_pairs[trial % len(color_pairs)]
        ref_a = recolor(images[i], GRID_COLORS[a])
        ref_b = recolor(images[i], GRID_COLORS[b])
        mask = masks[i // 4]
        hue_a = hue_b = 0.0
        for s in range(2):  # two seeds average out sampler speckle
            seed = 200 + trial + 1000 * s
            out_a, _ = transfer(sketches[i:i + 1], ref_a, steps=SAMPLE_STEPS,
                                seed=seed, model=model, schedule=schedule,
                                style_encoder=style_encoder)
            out_b, _ = transfer(sketches[i:i + 1], ref_b, steps=SAMPLE_STEPS,
                                seed=seed, model=model, schedule=schedule,
                                style_encoder=style_encoder)
            hue_a += region_hue(out_a, mask) / 2
            hue_b += region_hue(out_b, mask) / 2
        wins += int((hue_a < hue_b) == (mean_hue(ref_a) < mean_hue(ref_b)))
    return wins


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--steps", type=int, default=TRAIN_STEPS)
    parser.add_argument("--trials", type=int, default=TRIALS)
    parser.add_argument("--out", type=Path, default=Path("run/models/stm.pt"))
    args = parser.parse_args()

    torch.set_num_threads(1)
    images, sketches = make_grid_pairs(seed=5)
    masks = [(images[g * 4] - 0.92).abs().amax(0) > 0.05 for g in range(4)]
    schedule = make_schedule(T=T, alpha_end=ALPHA_END)

    torch.manual_seed(0)
    model = STMDenoiser(STMConfig())
    style_encoder = StyleEncoder(style_dim=model.cfg.style_dim, seed=1)
    trainer = STMTrainer(model, style_encoder, schedule,
                         lr=LR, batch_size=BATCH_SIZE, seed=0)

    t0 = time.time()
    trainer.train(sketches, images, steps=args.steps)
    train_s = time.time() - t0
    head = sum(trainer.history[:20]) / 20
    early = min(trainer.history[:500])
    tail = sum(trainer.history[-20:]) / 20
    print(f"trained {args.steps} steps in {train_s:.0f}s")
    print(f"loss head20={head:.4f} min(first500)={early:.4f} tail20={tail:.4f} "
          f"drop(first500)={1 - early / head:.1%}")

    t0 = time.time()
    s_wins = structure_trials(model, style_encoder, schedule, images, sketches, args.trials)
    h_wins = style_trials(model, style_encoder, schedule, images, sketches, masks, args.trials)
    print(f"structure trials: {s_wins}/{args.trials}  style trials: {h_wins}/{args.trials} "
          f"({time.time() - t0:.0f}s)")

    args.out.parent.mkdir(parents=True, exist_ok=True)
    torch.save({
        "model": model.state_dict(),
        "style_encoder": style_encoder.state_dict(),
        "schedule": {"T": T, "alpha_start": 0.9999, "alpha_end": ALPHA_END,
                     "interpolation": "linear_in_alpha_sq"},
    }, args.out)
    print(f"saved {args.out}")


if __name__ == "__main__":
    main()
