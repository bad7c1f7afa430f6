"""End-to-end video anti-spoofing classifier.

A clip [T, 3, H, W] is tokenized per frame by a strided convolution, passed
through ``depth`` transformer layers (convolutional Q/K/V projection,
multi-scale attention with residual, channel norm, convolutional feed-forward
with residual), mean-pooled over frames and space, and mapped linearly to two
logits (attack / bona fide). No class token and no positional encoding; the
convolutions carry all spatial structure, so logits are invariant to frame
order.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.stats import truncnorm

from . import tensor as tt
from . import vpt
from .attention import ScaleConfig, multiscale_attention
from .embed import VideoClip, conv_ffn, conv_project, conv_token_embed
from .rng import stream
from .tensor import AdamState, ShapeError, Tensor, adam_step

INIT_STD = 0.02


@dataclass(frozen=True)
class ModelConfig:
    frames: int = 8
    height: int = 32
    width: int = 32
    embed_stride: int = 8
    embed_channels: int = 12
    scales: tuple = (1, 2)
    depth: int = 2
    ffn_ratio: int = 4
    num_classes: int = 2
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "scales", tuple(int(s) for s in self.scales))
        if self.frames < 1:
            raise ValueError(f"need at least one frame, got {self.frames}")
        if self.depth < 0:
            raise ValueError(f"depth must be >= 0, got {self.depth}")
        if self.ffn_ratio < 1:
            raise ValueError(f"ffn_ratio must be >= 1, got {self.ffn_ratio}")
        if self.num_classes != 2:
            raise ValueError("the task is binary; num_classes must be 2")
        if self.height % self.embed_stride or self.width % self.embed_stride:
            raise ValueError(
                f"frame extent {self.height}x{self.width} not divisible by "
                f"stride {self.embed_stride}")
        self.scale_config.validate(self.embed_channels, self.map_h, self.map_w)

    @property
    def map_h(self) -> int:
        return self.height // self.embed_stride

    @property
    def map_w(self) -> int:
        return self.width // self.embed_stride

    @property
    def scale_config(self) -> ScaleConfig:
        return ScaleConfig(self.scales)


def parameter_shapes(cfg: ModelConfig) -> dict:
    """Name -> shape for every trainable tensor; fixed enumeration order."""
    c = cfg.embed_channels
    hid = cfg.ffn_ratio * c
    shapes = {
        "embed.weight": (c, 3, cfg.embed_stride, cfg.embed_stride),
        "embed.bias": (c,),
    }
    for i in range(cfg.depth):
        for nm in ("q", "k", "v"):
            shapes[f"layers.{i}.{nm}.weight"] = (c, c, 3, 3)
            shapes[f"layers.{i}.{nm}.bias"] = (c,)
        shapes[f"layers.{i}.norm.gamma"] = (c,)
        shapes[f"layers.{i}.norm.beta"] = (c,)
        shapes[f"layers.{i}.ffn1.weight"] = (hid, c, 1, 1)
        shapes[f"layers.{i}.ffn1.bias"] = (hid,)
        shapes[f"layers.{i}.ffn2.weight"] = (c, hid, 1, 1)
        shapes[f"layers.{i}.ffn2.bias"] = (c,)
    shapes["head.weight"] = (c, cfg.num_classes)
    shapes["head.bias"] = (cfg.num_classes,)
    return shapes


def init_params(cfg: ModelConfig, dtype=np.float32) -> dict:
    """Truncated-normal weights (sigma 0.02, cut at 2 sigma), zero biases,
    unit norm gains. Seeded by cfg.seed through the named-stream splitter."""
    rng = stream(cfg.seed, "init")
    params = {}
    for name, shape in parameter_shapes(cfg).items():
        if name.endswith("norm.gamma"):
            data = np.ones(shape, dtype=dtype)
        elif name.endswith(".bias") or name.endswith("norm.beta"):
            data = np.zeros(shape, dtype=dtype)
        else:
            data = truncnorm.rvs(-2.0, 2.0, scale=INIT_STD, size=shape,
                                 random_state=rng).astype(dtype)
        params[name] = tt.param(data)
    return params


def param_count(params: dict) -> int:
    return sum(p.size for p in params.values())


def _clip_array(clip) -> np.ndarray:
    if isinstance(clip, VideoClip):
        return np.asarray(clip.frames)
    if isinstance(clip, Tensor):
        return clip.data
    return np.asarray(clip)


def forward(clip, params: dict, cfg: ModelConfig, records: list | None = None) -> Tensor:
    """Logits [num_classes] for one clip; appends per-head attention weights
    to ``records`` when a list is supplied."""
    frames = _clip_array(clip)
    want = (cfg.frames, 3, cfg.height, cfg.width)
    if frames.shape != want:
        raise ShapeError(f"clip shape {frames.shape} does not match config {want}")
    x = conv_token_embed(clip, params["embed.weight"], params["embed.bias"],
                         cfg.embed_stride)
    scale_cfg = cfg.scale_config
    for i in range(cfg.depth):
        qkv = conv_project(
            x,
            params[f"layers.{i}.q.weight"], params[f"layers.{i}.q.bias"],
            params[f"layers.{i}.k.weight"], params[f"layers.{i}.k.bias"],
            params[f"layers.{i}.v.weight"], params[f"layers.{i}.v.bias"])
        h = multiscale_attention(qkv, scale_cfg, records=records, layer=i)
        y = tt.add(h, x)
        normed = tt.layer_norm(y, 1, params[f"layers.{i}.norm.gamma"],
                               params[f"layers.{i}.norm.beta"])
        f = conv_ffn(normed,
                     params[f"layers.{i}.ffn1.weight"], params[f"layers.{i}.ffn1.bias"],
                     params[f"layers.{i}.ffn2.weight"], params[f"layers.{i}.ffn2.bias"])
        x = tt.add(f, y)
    pooled = tt.mean(x, (0, 2, 3))
    row = tt.reshape(pooled, (1, cfg.embed_channels))
    logits = tt.add(tt.matmul(row, params["head.weight"]),
                    tt.reshape(params["head.bias"], (1, cfg.num_classes)))
    return tt.reshape(logits, (cfg.num_classes,))


def cross_entropy(logits: Tensor, label: int) -> Tensor:
    """Negative log-likelihood of the true class under softmax(logits).

    Scalar output; gradient is softmax(logits) minus the one-hot target.
    """
    z = logits.data
    if z.ndim != 1:
        raise ShapeError(f"cross_entropy expects a logit vector, got {z.shape}")
    if not 0 <= label < z.shape[0]:
        raise ValueError(f"label {label} out of range for {z.shape[0]} classes")
    m = z.max()
    lse = m + np.log(np.exp(z - m).sum())
    probs = np.exp(z - lse)

    def back(g):
        onehot = np.zeros_like(z)
        onehot[label] = 1.0
        return ((probs - onehot) * g,)

    return tt.record(np.asarray(lse - z[label], dtype=z.dtype), (logits,), back)


def zero_grads(params: dict):
    for p in params.values():
        p.grad = None


def train_step(batch, params: dict, opt_state: AdamState, cfg: ModelConfig,
               lr: float) -> float:
    """One optimization step on a batch of clips; returns the mean loss."""
    if not batch:
        raise ValueError("train_step: empty batch")
    with tt.Tape():
        losses = [tt.reshape(cross_entropy(forward(c, params, cfg), c.label), (1,))
                  for c in batch]
        total = tt.mean(tt.concat(losses, 0), (0,))
        tt.backward(total)
    loss_value = float(total.data)
    adam_step(params, opt_state, lr)
    zero_grads(params)
    return loss_value


def predict_score(clip, params: dict, cfg: ModelConfig,
                  records: list | None = None) -> float:
    """Probability the clip is bona fide (softmax mass of class 1)."""
    z = forward(clip, params, cfg, records=records).data.astype(np.float64)
    e = np.exp(z - z.max())
    return float(e[1] / e.sum())


def sample_frames(frames: np.ndarray, t: int, mode: str = "uniform",
                  rng: np.random.Generator | None = None, label: int = 0,
                  clip_id: str = "") -> VideoClip:
    """Pick T frames from a longer source video.

    ``uniform`` takes evenly spaced indices floor(i*S/T) starting at frame 0;
    ``random-interval`` draws a stride then a phase from ``rng``.
    """
    s = frames.shape[0]
    if s < t:
        raise ValueError(f"source has {s} frames, need {t}")
    if mode == "uniform":
        idx = (np.arange(t) * s) // t
    elif mode == "random-interval":
        if rng is None:
            raise ValueError("random-interval sampling needs an rng")
        stride = int(rng.integers(1, s // t + 1)) if t > 1 else int(rng.integers(1, s + 1))
        span = (t - 1) * stride
        phase = int(rng.integers(0, s - span))
        idx = phase + stride * np.arange(t)
    else:
        raise ValueError(f"unknown sampling mode: {mode!r}")
    return VideoClip(frames=np.ascontiguousarray(frames[idx]), label=label,
                     clip_id=clip_id)


def augment_frames(frames: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Label-preserving augmentation: horizontal flip (p=0.5) plus a mild
    per-clip gain and per-channel shift, clipped back to [0, 1]."""
    out = frames
    if rng.random() < 0.5:
        out = out[:, :, :, ::-1]
    gain = 1.0 + 0.2 * (rng.random() - 0.5)
    shift = (0.1 * (rng.random(3) - 0.5)).astype(frames.dtype)[None, :, None, None]
    return np.clip(out * gain + shift, 0.0, 1.0).astype(frames.dtype)


# ---------------------------------------------------------------------------
# checkpointing

def save_checkpoint(path, params: dict, config_text: str = ""):
    """Write a parameter manifest (name<TAB>relpath), one VPT1 file per tensor,
    and an echo of the run config."""
    root = Path(path)
    (root / "tensors").mkdir(parents=True, exist_ok=True)
    lines = []
    for name in sorted(params):
        rel = "tensors/" + name.replace(".", "_") + ".vpt"
        vpt.write_tensor(root / rel, params[name].data)
        lines.append(f"{name}\t{rel}")
    (root / "manifest.tsv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    if config_text:
        (root / "config.cfg").write_text(config_text, encoding="utf-8")


def load_checkpoint(path, cfg: ModelConfig | None = None) -> dict:
    """Read a checkpoint back into trainable tensors; with ``cfg`` given,
    validate the full inventory (names and shapes) against it."""
    root = Path(path)
    manifest = root / "manifest.tsv"
    if not manifest.is_file():
        raise FileNotFoundError(f"no checkpoint manifest at {manifest}")
    params = {}
    for line in manifest.read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        name, rel = line.split("\t")
        params[name] = tt.param(vpt.read_tensor(root / rel))
    if cfg is not None:
        want = parameter_shapes(cfg)
        missing = sorted(set(want) - set(params))
        extra = sorted(set(params) - set(want))
        if missing or extra:
            raise ShapeError(
                f"checkpoint inventory mismatch: missing {missing}, unexpected {extra}")
        for name, shape in want.items():
            if params[name].shape != shape:
                raise ShapeError(
                    f"checkpoint tensor {name} has shape {params[name].shape}, "
                    f"config expects {shape}")
    return params
