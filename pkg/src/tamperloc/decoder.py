"""UPerNet-style decoder: pyramid pooling on X4, top-down lateral fusion, fusion head.

Lateral merges concatenate the upsampled coarser map with the projected
encoder map and mix them with a 3x3 convolution (concatenation, not the
additive merge of a standard FPN).
"""
from __future__ import annotations

from dataclasses import dataclass

from .core import (
    ConfigurationError,
    DimensionError,
    bilinear_resize,
    adaptive_avg_pool,
    concat_channels,
    select_channels,
    softmax_channels,
)
from .nn import Conv, ConvAct, Module

LEVELS = ("X4", "X3", "X2", "X1")


def parse_fuse(spec):
    """'X4,X3' or ('X4', 'X3') -> validated top-down tuple."""
    items = spec.split(",") if isinstance(spec, str) else list(spec)
    items = tuple(s.strip().upper() for s in items if s.strip())
    if not items or "X4" not in items:
        raise ConfigurationError(f"fuse subset must contain X4, got {items}")
    unknown = set(items) - set(LEVELS)
    if unknown:
        raise ConfigurationError(f"unknown fuse levels {sorted(unknown)}; allowed {LEVELS}")
    ordered = tuple(lv for lv in LEVELS if lv in items)
    if ordered != LEVELS[: len(ordered)]:
        # lateral i needs Y_{i+1}, so the subset must be a top-down prefix
        raise ConfigurationError(f"fuse subset must be contiguous from X4 downward, got {ordered}")
    return ordered


@dataclass(frozen=True)
class DecoderConfig:
    fpn_channels: int | None = None
    ppm_bins: tuple = (1, 2, 3, 6)
    fuse: tuple = LEVELS

    def __post_init__(self):
        object.__setattr__(self, "fuse", parse_fuse(self.fuse))
        bins = tuple(int(b) for b in self.ppm_bins)
        if not bins or any(b < 1 for b in bins) or any(a >= b for a, b in zip(bins, bins[1:])):
            raise ConfigurationError(f"ppm_bins must be strictly increasing positive ints, got {bins}")
        object.__setattr__(self, "ppm_bins", bins)

    @classmethod
    def desk(cls, **kw):
        # X4 is 2x2 for a 64x64 input, so bins above 2 cannot be pooled
        return cls(**{"ppm_bins": (1, 2), **kw})

    def channels(self, enc_width):
        return self.fpn_channels or enc_width


@dataclass
class LocalizationMap:
    probs: object
    logits: object


class PPM(Module):
    def __init__(self, rng, c_in, c_f, bins):
        super().__init__()
        if c_f < len(bins):
            raise ConfigurationError(f"fpn_channels={c_f} smaller than number of PPM bins {len(bins)}")
        self.bins = bins
        branch = c_f // len(bins)
        self.branches = [
            self.add_child(f"pool{b}", ConvAct(rng, c_in, branch, 1, he=True)) for b in bins
        ]
        self.bottleneck = self.add_child(
            "bottleneck", ConvAct(rng, c_in + branch * len(bins), c_f, 3, padding=1, he=True))

    def __call__(self, x4):
        h, w = x4.shape[2:]
        if self.bins[-1] > min(h, w):
            raise ConfigurationError(
                f"PPM bin {self.bins[-1]} exceeds X4 spatial size {h}x{w}")
        parts = [x4]
        for b, conv in zip(self.bins, self.branches):
            parts.append(bilinear_resize(conv(adaptive_avg_pool(x4, b)), h, w))
        return self.bottleneck(concat_channels(parts))


class Lateral(Module):
    def __init__(self, rng, c_in, c_f):
        super().__init__()
        self.proj = self.add_child("proj", ConvAct(rng, c_in, c_f, 1, he=True))
        self.mix = self.add_child("mix", ConvAct(rng, 2 * c_f, c_f, 3, padding=1, he=True))

    def __call__(self, y_next, x_i):
        h, w = x_i.shape[2:]
        if y_next.shape[0] != x_i.shape[0] or (2 * y_next.shape[2], 2 * y_next.shape[3]) != (h, w):
            raise DimensionError(
                f"lateral: Y_next {y_next.shape} must be half the spatial size of X_i {x_i.shape}")
        up = bilinear_resize(y_next, h, w)
        return self.mix(concat_channels([up, self.proj(x_i)]))


class FuseHead(Module):
    def __init__(self, rng, c_f, n_levels):
        super().__init__()
        self.fuse = self.add_child("fuse", ConvAct(rng, n_levels * c_f, c_f, 3, padding=1, he=True))
        self.classifier = self.add_child("classifier", Conv(rng, c_f, 2, 1, he=True))

    def __call__(self, ys, target_h, target_w):
        if not ys:
            raise ConfigurationError("fuse_head needs at least one decoded map")
        h, w = ys[-1].shape[2:]
        aligned = [bilinear_resize(y, h, w) for y in ys]
        logits = self.classifier(self.fuse(concat_channels(aligned)))
        logits = bilinear_resize(logits, target_h, target_w)
        probs = select_channels(softmax_channels(logits), 1, 2)
        return LocalizationMap(probs=probs, logits=logits)


class Decoder(Module):
    def __init__(self, cfg, enc_channels, rng):
        super().__init__()
        self.cfg = cfg
        c_f = cfg.channels(enc_channels[0])
        self.ppm = self.add_child("ppm", PPM(rng, enc_channels[3], c_f, cfg.ppm_bins))
        self.laterals = {}
        for lv in cfg.fuse[1:]:
            i = int(lv[1])
            self.laterals[lv] = self.add_child(f"lateral{i}", Lateral(rng, enc_channels[i - 1], c_f))
        self.head = self.add_child("head", FuseHead(rng, c_f, len(cfg.fuse)))

    def __call__(self, feats, target_h, target_w):
        ys = [self.ppm(feats["X4"])]
        for lv in self.cfg.fuse[1:]:
            ys.append(self.laterals[lv](ys[-1], feats[lv]))
        return self.head(ys, target_h, target_w)
