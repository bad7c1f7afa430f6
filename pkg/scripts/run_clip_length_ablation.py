"""Clip-length ablation on temporal-cue-only data.

The dataset's only class difference is a global intensity pulse over time, so
a single-frame model is chance-level by construction while multi-frame models
can read the frame-to-frame variation. Expect mean ACER to fall steeply as
the clip length grows; the shipped acceptance gate requires the single-frame
model to trail the 8-frame model by at least 5 percentage points.

Usage: python scripts/run_clip_length_ablation.py [--out runs/clip_length]
"""

import argparse
import time
from pathlib import Path

from padformer.ablation import ablation_clip_length, write_ablation_csv
from padformer.config import RunConfig

CONFIG = RunConfig(
    frames=8, height=16, width=16, embed_stride=8, embed_channels=6,
    scales=(1, 2), depth=1, train_clips=48, dev_clips=32, test_clips=32,
    source_frames=8, texture_amp=0.0, pulse_amp=0.15, noise_sigma=0.02,
    steps=600, batch_size=8, lr=1e-3, seed=100)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="runs/clip_length")
    ap.add_argument("--seeds", type=int, default=3)
    args = ap.parse_args()

    start = time.monotonic()
    rows = ablation_clip_length(CONFIG, grid=(1, 2, 4, 8), n_seeds=args.seeds)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_ablation_csv(out / "ablation_clip-length.csv", rows, args.seeds)

    for label, mean_acer, acers in rows:
        per_seed = " ".join(f"{a:.2f}" for a in acers)
        print(f"{label}: mean ACER {mean_acer:.2f} (seeds: {per_seed})")
    gap = rows[0][1] - rows[-1][1]
    print(f"single-frame penalty: {gap:.2f}pp")
    print(f"total {time.monotonic() - start:.0f}s; CSV in {out}")


if __name__ == "__main__":
    main()
