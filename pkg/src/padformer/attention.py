"""Multi-scale multi-head self-attention over patches stacked across frames.

Each head partitions its channel slice of the Q/K/V maps into an l x l grid
per frame (l is the head's scale divisor), flattens every grid cell into one
token, and stacks the tokens of all T frames into a single sequence of
N = T * l**2 patches. Attention therefore mixes same-frame pairs (short-range,
spatial) and cross-frame pairs (long-range, temporal) inside one score matrix.
Attended patches are placed back at their frame/grid positions and the heads
are concatenated along channels.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import tensor as tt
from .tensor import ShapeError, Tensor


@dataclass(frozen=True)
class ScaleConfig:
    """Per-head grid divisors; the head count is the number of scales."""

    scales: tuple

    def __post_init__(self):
        object.__setattr__(self, "scales", tuple(int(s) for s in self.scales))
        if not self.scales:
            raise ValueError("at least one scale is required")
        for s in self.scales:
            if s < 1:
                raise ValueError(f"scale divisors must be >= 1, got {s}")

    @property
    def head_count(self) -> int:
        return len(self.scales)

    def validate(self, channels: int, map_h: int, map_w: int):
        if channels % self.head_count:
            raise ShapeError(
                f"{channels} channels not divisible across {self.head_count} heads")
        for s in self.scales:
            if map_h % s or map_w % s:
                raise ShapeError(f"scale {s} does not divide map extent {map_h}x{map_w}")


@dataclass
class HeadPatchSet:
    """The N = T * l**2 flattened patch tokens of one head.

    ``tokens`` is [N, D] with D = channels * cell_h * cell_w. Token order is
    frame-major, then grid row, then grid column; ``frame_of`` and ``cell_of``
    map token index back to its source frame and grid cell.
    """

    tokens: Tensor
    frames: int
    scale: int
    channels: int
    cell_h: int
    cell_w: int
    frame_of: np.ndarray = field(repr=False, default=None)
    cell_of: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        n = self.frames * self.scale ** 2
        if self.tokens.shape != (n, self.channels * self.cell_h * self.cell_w):
            raise ShapeError(
                f"token matrix {self.tokens.shape} inconsistent with "
                f"T={self.frames}, l={self.scale}, C={self.channels}, "
                f"cell={self.cell_h}x{self.cell_w}")
        if self.frame_of is None:
            idx = np.arange(n)
            self.frame_of = idx // self.scale ** 2
            rem = idx % self.scale ** 2
            self.cell_of = np.stack([rem // self.scale, rem % self.scale], axis=1)

    @property
    def count(self) -> int:
        return self.tokens.shape[0]

    @property
    def dim(self) -> int:
        return self.tokens.shape[1]


@dataclass
class AttentionRecord:
    """Row-stochastic attention weights of one head, kept for map export."""

    layer: int
    head: int
    scale: int
    alpha: np.ndarray          # [N, N]
    frame_of: np.ndarray
    cell_of: np.ndarray
    map_h: int
    map_w: int


def partition_patches(f: Tensor, scale: int) -> HeadPatchSet:
    """Split each frame of [T, C, H, W] into an l x l grid of flattened tokens."""
    t, c, h, w = f.shape
    if h % scale or w % scale:
        raise ShapeError(f"scale {scale} does not divide map extent {h}x{w}")
    ph, pw = h // scale, w // scale
    g = tt.reshape(f, (t, c, scale, ph, scale, pw))
    g = tt.transpose(g, (0, 2, 4, 1, 3, 5))          # [T, l, l, C, ph, pw]
    tokens = tt.reshape(g, (t * scale * scale, c * ph * pw))
    return HeadPatchSet(tokens, frames=t, scale=scale, channels=c, cell_h=ph, cell_w=pw)


def unpartition_patches(ps: HeadPatchSet) -> Tensor:
    """Place every token back at its frame/grid position; inverse of partition."""
    t, l, c, ph, pw = ps.frames, ps.scale, ps.channels, ps.cell_h, ps.cell_w
    g = tt.reshape(ps.tokens, (t, l, l, c, ph, pw))
    g = tt.transpose(g, (0, 3, 1, 4, 2, 5))          # [T, C, l, ph, l, pw]
    return tt.reshape(g, (t, c, l * ph, l * pw))


def head_attention(qp: HeadPatchSet, kp: HeadPatchSet, vp: HeadPatchSet,
                   record: list | None = None, layer: int = 0, head: int = 0) -> HeadPatchSet:
    """Scaled dot-product attention over one head's stacked patch tokens.

    Scores are q . k / sqrt(D) with D the flattened patch dimension of this
    head, softmaxed per query row; the attended tokens keep the query
    geometry. When ``record`` is given the weight matrix is appended to it.
    """
    if (qp.count, qp.dim) != (kp.count, kp.dim) or (kp.count, kp.dim) != (vp.count, vp.dim):
        raise ShapeError(
            f"q/k/v token sets disagree: {qp.tokens.shape}, {kp.tokens.shape}, {vp.tokens.shape}")
    scores = tt.scale(tt.matmul(qp.tokens, tt.transpose(kp.tokens, (1, 0))),
                      1.0 / np.sqrt(qp.dim))
    alpha = tt.softmax(scores, axis=1)
    if record is not None:
        record.append(AttentionRecord(
            layer=layer, head=head, scale=qp.scale, alpha=alpha.data.copy(),
            frame_of=qp.frame_of, cell_of=qp.cell_of,
            map_h=qp.scale * qp.cell_h, map_w=qp.scale * qp.cell_w))
    attended = tt.matmul(alpha, vp.tokens)
    return HeadPatchSet(attended, frames=vp.frames, scale=vp.scale, channels=vp.channels,
                        cell_h=vp.cell_h, cell_w=vp.cell_w,
                        frame_of=vp.frame_of, cell_of=vp.cell_of)


def reassemble_and_concat(heads: list) -> Tensor:
    """Restore each head to full map resolution and concatenate on channels."""
    if not heads:
        raise ValueError("no heads to reassemble")
    maps = [unpartition_patches(h) for h in heads]
    t, _, h, w = maps[0].shape
    for m in maps[1:]:
        if m.shape[0] != t or m.shape[2:] != (h, w):
            raise ShapeError(f"head maps disagree: {maps[0].shape} vs {m.shape}")
    return maps[0] if len(maps) == 1 else tt.concat(maps, axis=1)


def multiscale_attention(qkv, cfg: ScaleConfig, records: list | None = None,
                         layer: int = 0) -> Tensor:
    """Full multi-scale attention: split channels across heads, attend, reassemble.

    ``qkv`` holds three [T, C, H, W] maps; the result has the same shape and is
    added residually by the caller.
    """
    q, k, v = qkv
    if q.shape != k.shape or k.shape != v.shape:
        raise ShapeError(f"q/k/v maps disagree: {q.shape}, {k.shape}, {v.shape}")
    _, c, h, w = q.shape
    cfg.validate(c, h, w)
    n_heads = cfg.head_count
    if n_heads > 1:
        qs, ks, vs = tt.split(q, n_heads, 1), tt.split(k, n_heads, 1), tt.split(v, n_heads, 1)
    else:
        qs, ks, vs = [q], [k], [v]
    out_heads = []
    for i, l in enumerate(cfg.scales):
        qp = partition_patches(qs[i], l)
        kp = partition_patches(ks[i], l)
        vp = partition_patches(vs[i], l)
        out_heads.append(head_attention(qp, kp, vp, record=records, layer=layer, head=i))
    return reassemble_and_concat(out_heads)


def short_long_masks(frame_of: np.ndarray):
    """Boolean [N, N] masks of same-frame (short) and cross-frame (long) pairs.

    The two masks partition the score matrix exactly.
    """
    same = frame_of[:, None] == frame_of[None, :]
    return same, ~same


def attention_rollout(rec: AttentionRecord, frame: int) -> np.ndarray:
    """Heat map of attention mass received per spatial cell of one frame.

    Each token's column of the weight matrix is averaged over all query rows
    and painted onto its grid cell; the result is a [map_h, map_w] float map
    at token-map resolution.
    """
    n_frames = int(rec.frame_of.max()) + 1
    if not 0 <= frame < n_frames:
        raise ValueError(f"frame {frame} out of range for {n_frames}-frame record")
    received = rec.alpha.mean(axis=0)
    heat = np.zeros((rec.map_h, rec.map_w), dtype=rec.alpha.dtype)
    ch, cw = rec.map_h // rec.scale, rec.map_w // rec.scale
    for token in np.nonzero(rec.frame_of == frame)[0]:
        r, col = rec.cell_of[token]
        heat[r * ch:(r + 1) * ch, col * cw:(col + 1) * cw] = received[token]
    return heat


def upsample_nearest(heat: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Nearest-neighbour upsample used when exporting maps at frame resolution."""
    h, w = heat.shape
    rows = (np.arange(out_h) * h) // out_h
    cols = (np.arange(out_w) * w) // out_w
    return heat[np.ix_(rows, cols)]
