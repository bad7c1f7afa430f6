"""Flat key=value run configuration.

One text format drives every CLI command: UTF-8 lines of ``key=value``, full
lines starting with ``#`` are comments, blank lines ignored. Unknown and
duplicate keys are hard errors with line numbers. Every key has a default, so
an empty file parses to the default run.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path

from .model import ModelConfig
from .synth import SynthSpec


class ConfigError(ValueError):
    """Malformed run configuration text."""


@dataclass(frozen=True)
class RunConfig:
    # model
    frames: int = 8
    height: int = 32
    width: int = 32
    embed_stride: int = 8
    embed_channels: int = 12
    scales: tuple = (1, 2)
    depth: int = 2
    ffn_ratio: int = 4
    # synthetic data
    train_clips: int = 400
    dev_clips: int = 50
    test_clips: int = 50
    source_frames: int = 8
    texture_amp: float = 0.1
    pulse_amp: float = 0.15
    pulse_freq_min: float = 0.5
    pulse_freq_max: float = 2.0
    noise_sigma: float = 0.02
    # optimization
    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    steps: int = 2000
    batch_size: int = 16
    warmup_frac: float = 0.05
    sample_mode: str = "uniform"
    augment: bool = True
    # paths and seeding
    data_dir: str = ""
    out_dir: str = "runs/default"
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "scales", tuple(int(s) for s in self.scales))
        if self.sample_mode not in ("uniform", "random-interval"):
            raise ConfigError(f"sample_mode must be uniform or random-interval, "
                              f"got {self.sample_mode!r}")
        if self.batch_size < 1 or self.steps < 0:
            raise ConfigError("batch_size must be >= 1 and steps >= 0")
        if not 0 <= self.warmup_frac <= 1:
            raise ConfigError("warmup_frac must lie in [0, 1]")
        if self.source_frames < self.frames:
            raise ConfigError(f"source_frames {self.source_frames} < clip length "
                              f"{self.frames}")

    def model_config(self) -> ModelConfig:
        return ModelConfig(frames=self.frames, height=self.height, width=self.width,
                           embed_stride=self.embed_stride,
                           embed_channels=self.embed_channels, scales=self.scales,
                           depth=self.depth, ffn_ratio=self.ffn_ratio,
                           seed=self.seed)

    def synth_spec(self) -> SynthSpec:
        return SynthSpec(train_clips=self.train_clips, dev_clips=self.dev_clips,
                         test_clips=self.test_clips, height=self.height,
                         width=self.width, source_frames=self.source_frames,
                         texture_amp=self.texture_amp, pulse_amp=self.pulse_amp,
                         pulse_freq_min=self.pulse_freq_min,
                         pulse_freq_max=self.pulse_freq_max,
                         noise_sigma=self.noise_sigma, seed=self.seed)


_FIELDS = {f.name: f for f in dataclasses.fields(RunConfig)}


def _parse_value(field, raw: str, line_no: int):
    name, text = field.name, raw.strip()
    if field.type in ("int", int):
        try:
            return int(text)
        except ValueError:
            raise ConfigError(f"line {line_no}: invalid int for {name!r}: {text!r}")
    if field.type in ("float", float):
        try:
            return float(text)
        except ValueError:
            raise ConfigError(f"line {line_no}: invalid float for {name!r}: {text!r}")
    if field.type in ("bool", bool):
        if text == "true":
            return True
        if text == "false":
            return False
        raise ConfigError(f"line {line_no}: invalid bool for {name!r}: {text!r} "
                          f"(use true/false)")
    if field.type in ("tuple", tuple):
        parts = [p.strip() for p in text.split(",") if p.strip()]
        if not parts:
            raise ConfigError(f"line {line_no}: {name!r} needs at least one entry")
        try:
            return tuple(int(p) for p in parts)
        except ValueError:
            raise ConfigError(f"line {line_no}: invalid int list for {name!r}: {text!r}")
    return text


def parse_config(text: str, overrides: dict | None = None) -> RunConfig:
    """Parse config text; ``overrides`` (already typed) win over file values."""
    values = {}
    for line_no, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {line_no}: expected key=value, got {stripped!r}")
        key, _, raw = stripped.partition("=")
        key = key.strip()
        if key not in _FIELDS:
            raise ConfigError(f"line {line_no}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {line_no}: duplicate key {key!r}")
        values[key] = _parse_value(_FIELDS[key], raw, line_no)
    if overrides:
        values.update(overrides)
    return RunConfig(**values)


def load_config(path, overrides: dict | None = None) -> RunConfig:
    return parse_config(Path(path).read_text(encoding="utf-8"), overrides)


def _format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ",".join(str(v) for v in value)
    return repr(value) if isinstance(value, float) else str(value)


def dump_config(cfg: RunConfig) -> str:
    """Every key on its own line, in declaration order; re-parses to ``cfg``."""
    lines = [f"{f.name}={_format_value(getattr(cfg, f.name))}"
             for f in dataclasses.fields(RunConfig)]
    return "\n".join(lines) + "\n"
