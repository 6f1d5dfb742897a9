"""Short CPU fine-tune of the image-to-sketch generator.

Trains against paired shape images and outlines while pulling the generator's
feature statistics toward a small designer corpus. The style term to watch is
the Gram loss: its tail-over-start ratio is printed at the end. Saves weights
under --out for the local service to load.
"""

import argparse
import time
from pathlib import Path

import torch

from haigen.sketch import (
    EncoderConfig, I2SMTrainConfig, I2SMTrainer, SketchEncoder,
    SketchGenerator, SketchGeneratorConfig, compute_style_stats,
)
from haigen.sketch.encoder import as_rgb
from haigen.synth import make_designer_corpus, make_shape_pairs

LR = 1e-3
TRAIN_STEPS = 200
PAIRS = 16
CORPUS = 12
SIZE = 64


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--steps", type=int, default=TRAIN_STEPS)
    parser.add_argument("--out", type=Path, default=Path("run/models/i2s.pt"))
    args = parser.parse_args()

    torch.set_num_threads(1)
    images, sketches = make_shape_pairs(PAIRS, SIZE, seed=13)
    corpus = make_designer_corpus(CORPUS, SIZE, seed=3)
    stats = compute_style_stats(as_rgb(corpus), SketchEncoder(EncoderConfig()),
                                designer_id="smoke-designer")

    torch.manual_seed(0)
    model = SketchGenerator(SketchGeneratorConfig())
    trainer = I2SMTrainer(model, stats, I2SMTrainConfig(lr=LR, seed=0))

    t0 = time.time()
    history = trainer.train(images, sketches, steps=args.steps)
    train_s = time.time() - t0

    gram0 = history[0]["gram"]
    tail = [h["gram"] for h in history[-10:]]
    ratio = (sum(tail) / len(tail)) / gram0
    print(f"trained {args.steps} steps in {train_s:.0f}s")
    print(f"gram start={gram0:.3g} tail10={sum(tail) / len(tail):.3g} ratio={ratio:.3f}")
    print(f"total start={history[0]['total']:.4f} end={history[-1]['total']:.4f}")

    args.out.parent.mkdir(parents=True, exist_ok=True)
    torch.save({"model": model.state_dict(), "designer_id": stats.designer_id}, args.out)
    print(f"saved {args.out}")


if __name__ == "__main__":
    main()
