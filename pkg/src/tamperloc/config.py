"""Flat ``key = value`` run configuration.

One file configures every stage. ``#`` starts a comment. Unknown keys are
errors. ``dump`` writes every key in a fixed order with canonical
formatting, so a dumped file parses back to an identical config and dumps
to identical bytes.
"""
from __future__ import annotations

from dataclasses import dataclass, fields, replace
from pathlib import Path

from .core import ConfigurationError
from .dataforge.augment import AugmentConfig
from .decoder import DecoderConfig, parse_fuse
from .encoder import EncoderConfig
from .loss import LossConfig
from .trainer import TrainConfig


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    preset: str = "desk"
    # synthesis
    n: int = 16
    size: int = 64
    augment: bool = True
    # network
    encoder: str = "convnext"
    width: int = 8
    blocks: tuple = (1, 1, 2, 1)
    layer_scale_init: float = 1e-6
    fpn_channels: int = 8
    ppm_bins: tuple = (1, 2)
    fuse: tuple = ("X4", "X3", "X2", "X1")
    # loss
    loss: str = "combined"
    alpha: float = 0.25
    gamma: float = 2.0
    lambda1: float = 1.0
    lambda2: float = 1.0
    eps: float = 1e-7
    # augmentation
    resize_range: tuple = (0.5, 2.0)
    crop: tuple = (64, 64)
    flip_p: float = 0.5
    noise_p: float = 0.5
    blur_p: float = 0.5
    photometric_p: float = 0.5
    jpeg_p: float = 0.5
    jpeg_q_range: tuple = (71, 95)
    brightness: float = 0.25
    contrast: float = 0.25
    saturation: float = 0.25
    hue_degrees: float = 18.0
    noise_sigma: tuple = (1.0, 10.0)
    blur_sigma: tuple = (0.5, 2.0)
    # training
    base_lr: float = 2e-3
    warmup_iters: int = 100
    warmup_ratio: float = 0.01
    max_iters: int = 1000
    poly_power: float = 0.9
    batch_size: int = 4
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    weight_decay: float = 0.0
    clip_norm: float = 0.0
    seed: int = 0
    log_every: int = 25
    checkpoint_every: int = 0
    # evaluation
    threshold: float = 0.5

    def encoder_config(self):
        return EncoderConfig(width=self.width, blocks=self.blocks,
                             layer_scale_init=self.layer_scale_init, kind=self.encoder)

    def decoder_config(self):
        return DecoderConfig(fpn_channels=self.fpn_channels, ppm_bins=self.ppm_bins, fuse=self.fuse)

    def loss_config(self):
        return LossConfig(alpha=self.alpha, gamma=self.gamma, lambda1=self.lambda1,
                          lambda2=self.lambda2, eps=self.eps, kind=self.loss)

    def augment_config(self):
        if not self.augment:
            return None
        names = {f.name for f in fields(AugmentConfig)}
        return AugmentConfig(**{k: getattr(self, k) for k in names})

    def train_config(self):
        names = {f.name for f in fields(TrainConfig)}
        return TrainConfig(**{k: getattr(self, k) for k in names})

    def validate(self):
        """Build every sub-config once so invalid values fail early."""
        try:
            self.encoder_config()
            self.decoder_config()
            self.loss_config()
            self.augment_config()
            self.train_config()
        except ConfigurationError as exc:
            raise ConfigError(str(exc)) from None
        if self.n < 1:
            raise ConfigError(f"n must be >= 1, got {self.n}")
        if self.size < 32 or self.size % 32:
            raise ConfigError(f"size must be a positive multiple of 32, got {self.size}")
        if any(c % 32 for c in self.crop):
            raise ConfigError(f"crop must be multiples of 32, got {self.crop}")
        return self


FULL = dict(
    preset="full", size=512, width=128, blocks=(3, 3, 27, 3), fpn_channels=128,
    ppm_bins=(1, 2, 3, 6), crop=(512, 512), base_lr=1e-4, warmup_iters=1500,
    max_iters=160_000, weight_decay=0.05, log_every=50, checkpoint_every=16_000,
)

PRESETS = {"desk": {}, "full": FULL}

_FIELDS = {f.name: f for f in fields(RunConfig)}


def _parse_bool(text):
    low = text.lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_value(key, text):
    default = getattr(RunConfig(), key)
    text = text.strip()
    if key == "fuse":
        return parse_fuse(text)
    if isinstance(default, bool):
        return _parse_bool(text)
    if isinstance(default, int):
        return int(text)
    if isinstance(default, float):
        return float(text)
    if isinstance(default, tuple):
        kind = type(default[0])
        return tuple(kind(v) for v in text.split(","))
    return text


def _format_value(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ",".join(_format_value(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def parse_pairs(pairs):
    """[(key, raw value)] -> validated dict; unknown keys raise ConfigError."""
    out = {}
    for key, raw in pairs:
        if key not in _FIELDS:
            raise ConfigError(f"unknown config key {key!r}")
        try:
            out[key] = _parse_value(key, raw)
        except Exception as exc:
            raise ConfigError(f"bad value for {key!r}: {raw!r} ({exc})") from None
    return out


def read_pairs(path):
    pairs = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, value = line.split("=", 1)
        pairs.append((key.strip(), value))
    return pairs


def resolve(path=None, overrides=()):
    """Preset defaults, then file values, then ``overrides`` (key, raw value) pairs."""
    pairs = (read_pairs(path) if path else []) + list(overrides)
    values = parse_pairs(pairs)
    preset = values.get("preset", "desk")
    if preset not in PRESETS:
        raise ConfigError(f"unknown preset {preset!r}; choose from {sorted(PRESETS)}")
    cfg = replace(RunConfig(), **PRESETS[preset])
    return replace(cfg, **values).validate()


def dump(cfg):
    lines = ["# resolved run configuration"]
    for name in _FIELDS:
        lines.append(f"{name} = {_format_value(getattr(cfg, name))}")
    return "\n".join(lines) + "\n"


def write(cfg, path):
    Path(path).write_text(dump(cfg))
