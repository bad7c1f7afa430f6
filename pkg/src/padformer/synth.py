"""Deterministic synthetic spoof-video generator.

Every clip shares class-agnostic base content (face-like blob, smooth
background texture, per-frame translation jitter) drawn from a stream keyed by
(seed, split, index) only, so a bona fide clip and an attack clip with the
same index differ in nothing but the class cues:

* bona fide: a global intensity sinusoid over time (pulse-like temporal cue);
* attack: a static high-frequency grid (moire-like spatial cue) plus a
  constant intensity offset drawn from the same sinusoid family (zero
  temporal oscillation).

The constant offset makes single-frame marginals of the two classes
identical, so a one-frame model is chance-level on the temporal-cue-only
variant while a multi-frame model can read the frame-to-frame variation.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import vpt
from .rng import stream

SPLITS = ("train", "dev", "test")

# class-agnostic content levels, identical for both classes by construction
_BASE_GRAY = 0.45
_BLOB_AMP = (0.30, 0.22, 0.18)
_TEXTURE_BASE_AMP = 0.04
_JITTER_STD = 0.8


@dataclass(frozen=True)
class SynthSpec:
    train_clips: int = 400          # per class
    dev_clips: int = 50
    test_clips: int = 50
    height: int = 32
    width: int = 32
    source_frames: int = 8
    texture_amp: float = 0.10       # attack spatial cue
    pulse_amp: float = 0.15         # bona fide temporal cue
    pulse_freq_min: float = 0.5     # cycles per clip
    pulse_freq_max: float = 2.0
    noise_sigma: float = 0.02
    seed: int = 0

    def __post_init__(self):
        for name in ("texture_amp", "pulse_amp", "noise_sigma"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.pulse_freq_min > self.pulse_freq_max:
            raise ValueError("pulse_freq_min must not exceed pulse_freq_max")
        for name in ("train_clips", "dev_clips", "test_clips",
                     "height", "width", "source_frames"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")

    def clips_for(self, split: str) -> int:
        return {"train": self.train_clips, "dev": self.dev_clips,
                "test": self.test_clips}[split]


@dataclass
class ClipRecord:
    clip_id: str
    frames: np.ndarray              # [S, 3, H, W] float32 in [0, 1]
    label: int                      # 1 = bona fide
    split: str


def _base_content(spec: SynthSpec, split: str, idx: int) -> np.ndarray:
    """Class-shared canvas: blob + low-frequency texture + jitter trajectory."""
    rng = stream(spec.seed, "base", split, idx)
    s, h, w = spec.source_frames, spec.height, spec.width
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)

    cy = h / 2 + rng.uniform(-2, 2)
    cx = w / 2 + rng.uniform(-2, 2)
    sigma = h / 5 + rng.uniform(-0.5, 0.5)
    jitter = rng.normal(scale=_JITTER_STD, size=(s, 2))

    fy = rng.uniform(0.5, 1.5, size=2)
    fx = rng.uniform(0.5, 1.5, size=2)
    ph = rng.uniform(0, 2 * np.pi, size=2)
    texture = np.zeros((h, w))
    for i in range(2):
        texture += np.sin(2 * np.pi * (fy[i] * yy / h + fx[i] * xx / w) + ph[i])
    texture *= _TEXTURE_BASE_AMP / 2

    clip = np.empty((s, 3, h, w), dtype=np.float64)
    for t in range(s):
        d2 = (yy - cy - jitter[t, 0]) ** 2 + (xx - cx - jitter[t, 1]) ** 2
        blob = np.exp(-d2 / (2 * sigma * sigma))
        for c in range(3):
            clip[t, c] = _BASE_GRAY + _BLOB_AMP[c] * blob + texture
    return clip


def _make_clip(spec: SynthSpec, split: str, idx: int, label: int) -> np.ndarray:
    clip = _base_content(spec, split, idx)
    s, h, w = spec.source_frames, spec.height, spec.width
    cue = stream(spec.seed, "cue", split, idx, label)

    if label == 1:
        freq = cue.uniform(spec.pulse_freq_min, spec.pulse_freq_max)
        phase = cue.uniform(0, 2 * np.pi)
        wave = spec.pulse_amp * np.sin(2 * np.pi * freq * np.arange(s) / s + phase)
        clip += wave[:, None, None, None]
    else:
        offset = spec.pulse_amp * np.sin(cue.uniform(0, 2 * np.pi))
        clip += offset
        if spec.texture_amp > 0:
            yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
            gy = cue.uniform(0, 2 * np.pi)
            gx = cue.uniform(0, 2 * np.pi)
            # ~2.5-pixel period, well above the base texture's frequency
            grid = np.sin(0.8 * np.pi * yy + gy) * np.sin(0.8 * np.pi * xx + gx)
            clip += spec.texture_amp * grid

    if spec.noise_sigma > 0:
        noise = stream(spec.seed, "noise", split, idx, label)
        clip += noise.normal(scale=spec.noise_sigma, size=clip.shape)
    return np.clip(clip, 0.0, 1.0).astype(np.float32)


def generate_dataset(spec: SynthSpec) -> list:
    """All clips of all splits, a pure function of the generation settings."""
    records = []
    for split in SPLITS:
        for label, tag in ((0, "attack"), (1, "bona")):
            for idx in range(spec.clips_for(split)):
                records.append(ClipRecord(
                    clip_id=f"{split}_{tag}_{idx:04d}",
                    frames=_make_clip(spec, split, idx, label),
                    label=label, split=split))
    return records


def split_records(records, split: str) -> list:
    out = [r for r in records if r.split == split]
    if not out:
        raise ValueError(f"store has no clips for split {split!r}")
    return out


# ---------------------------------------------------------------------------
# on-disk store: manifest CSV + one VPT1 tensor per clip

def write_store(path, records):
    root = Path(path)
    (root / "clips").mkdir(parents=True, exist_ok=True)
    with open(root / "manifest.csv", "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["clip_id", "path", "label", "split"])
        for r in records:
            rel = f"clips/{r.clip_id}.vpt"
            vpt.write_tensor(root / rel, r.frames)
            writer.writerow([r.clip_id, rel, r.label, r.split])


def load_store(path) -> list:
    root = Path(path)
    manifest = root / "manifest.csv"
    if not manifest.is_file():
        raise FileNotFoundError(f"no dataset manifest at {manifest}")
    records = []
    with open(manifest, encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            records.append(ClipRecord(
                clip_id=row["clip_id"],
                frames=vpt.read_tensor(root / row["path"]),
                label=int(row["label"]),
                split=row["split"]))
    return records
