"""Training and evaluation loops shared by the CLI and the ablation drivers.

All randomness (batch order, frame sampling, augmentation) flows from the run
seed through named streams, so two runs with the same config produce
byte-identical logs and checkpoints.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import RunConfig
from .metrics import MetricReport, compute_metrics, select_threshold
from .model import (ModelConfig, augment_frames, init_params, predict_score,
                    sample_frames, train_step)
from .rng import stream
from .synth import split_records
from .tensor import AdamState


@dataclass
class TrainResult:
    params: dict
    model_config: ModelConfig
    log_rows: list          # (step, loss, lr)


def lr_at(step: int, base_lr: float, total_steps: int, warmup_frac: float) -> float:
    """Linear warmup to base_lr over warmup_frac of the run, then constant."""
    warm = int(np.ceil(warmup_frac * total_steps))
    if warm <= 0 or step >= warm:
        return base_lr
    return base_lr * (step + 1) / warm


def make_batch(records, cfg: RunConfig, batch_rng, sample_rng, augment_rng):
    picks = batch_rng.integers(0, len(records), size=cfg.batch_size)
    batch = []
    for i in picks:
        r = records[i]
        frames = r.frames
        if cfg.augment:
            frames = augment_frames(frames, augment_rng)
        batch.append(sample_frames(frames, cfg.frames, cfg.sample_mode,
                                   rng=sample_rng, label=r.label, clip_id=r.clip_id))
    return batch


def train_model(cfg: RunConfig, train_records) -> TrainResult:
    if not train_records:
        raise ValueError("no training clips")
    mcfg = cfg.model_config()
    params = init_params(mcfg)
    state = AdamState(params)
    batch_rng = stream(cfg.seed, "batches")
    sample_rng = stream(cfg.seed, "sampling")
    augment_rng = stream(cfg.seed, "augment")
    rows = []
    for step in range(cfg.steps):
        batch = make_batch(train_records, cfg, batch_rng, sample_rng, augment_rng)
        lr = lr_at(step, cfg.lr, cfg.steps, cfg.warmup_frac)
        loss = train_step(batch, params, state, mcfg, lr)
        rows.append((step, loss, lr))
    return TrainResult(params=params, model_config=mcfg, log_rows=rows)


def score_split(params, mcfg: ModelConfig, records, cfg: RunConfig):
    """(score, label) per clip; evaluation always samples frames uniformly."""
    out = []
    for r in records:
        clip = sample_frames(r.frames, mcfg.frames, "uniform",
                             label=r.label, clip_id=r.clip_id)
        out.append((predict_score(clip, params, mcfg), r.label))
    return out


def evaluate(params, mcfg: ModelConfig, records, cfg: RunConfig,
             split: str = "test") -> MetricReport:
    """Fix the threshold on the dev split, then report metrics on ``split``."""
    dev_scores = score_split(params, mcfg, split_records(records, "dev"), cfg)
    threshold = select_threshold(dev_scores)
    target = score_split(params, mcfg, split_records(records, split), cfg)
    return compute_metrics(target, threshold)


def format_log(rows) -> str:
    lines = ["step,loss,lr"]
    for step, loss, lr in rows:
        lines.append(f"{step},{loss:.6f},{lr:.6g}")
    return "\n".join(lines) + "\n"
