"""ConvNeXt-style hierarchical encoder.

Stage i (1..4) produces X_i with 2**(i-1) * C channels at 1/2**(i+1) of the
input resolution. Stages 2..4 each begin with a 2x downsampling layer.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import ConfigurationError, DimensionError, add, as_tensor, scale_channels
from .nn import Conv, ConvAct, LayerNorm, Module

INPUT_MULTIPLE = 32


@dataclass(frozen=True)
class EncoderConfig:
    width: int = 128
    blocks: tuple = (3, 3, 27, 3)
    layer_scale_init: float = 1e-6
    kind: str = "convnext"

    def __post_init__(self):
        if len(self.blocks) != 4 or any(b < 1 for b in self.blocks):
            raise ConfigurationError(f"blocks must be 4 integers >= 1, got {self.blocks}")
        if self.width < 2 or self.width % 2:
            raise ConfigurationError(f"width must be a positive even integer, got {self.width}")
        if self.kind not in ("convnext", "cnn"):
            raise ConfigurationError(f"encoder kind must be 'convnext' or 'cnn', got {self.kind!r}")

    @classmethod
    def desk(cls, **kw):
        return cls(**{"width": 8, "blocks": (1, 1, 2, 1), **kw})

    @property
    def stage_channels(self):
        return tuple(self.width * 2**i for i in range(4))


@dataclass
class StageOutputs:
    X0: object
    X1: object
    X2: object
    X3: object
    X4: object

    def features(self):
        return {"X1": self.X1, "X2": self.X2, "X3": self.X3, "X4": self.X4}


def stage_shapes(n, h, w, width):
    """Closed-form (N, C, H, W) of X1..X4."""
    return [(n, width * 2 ** (i - 1), h // 2 ** (i + 1), w // 2 ** (i + 1)) for i in range(1, 5)]


def check_input_size(h, w):
    if h % INPUT_MULTIPLE or w % INPUT_MULTIPLE:
        raise DimensionError(
            f"input size {h}x{w} not supported: H and W must be multiples of {INPUT_MULTIPLE}")


class Stem(Module):
    def __init__(self, rng, width):
        super().__init__()
        self.conv = self.add_child("conv", Conv(rng, 3, width, 4, stride=4))
        self.norm = self.add_child("norm", LayerNorm(width))

    def __call__(self, image):
        image = as_tensor(image)
        if image.ndim != 4 or image.shape[1] != 3:
            raise DimensionError(f"stem expects (N, 3, H, W), got {image.shape}")
        check_input_size(*image.shape[2:])
        return self.norm(self.conv(image))


class ConvNeXtBlock(Module):
    """x + ls * pw2(gelu(pw1(norm(dw7x7(x)))))."""

    def __init__(self, rng, dim, layer_scale_init=1e-6):
        super().__init__()
        self.dw = self.add_child("dw", Conv(rng, dim, dim, 7, padding=3, groups=dim))
        self.norm = self.add_child("norm", LayerNorm(dim))
        self.pw1 = self.add_child("pw1", ConvAct(rng, dim, 4 * dim, 1))
        self.pw2 = self.add_child("pw2", Conv(rng, 4 * dim, dim, 1))
        self.ls = self.add_param("ls", np.full(dim, float(layer_scale_init)))

    def __call__(self, x):
        y = self.pw2(self.pw1(self.norm(self.dw(x))))
        return add(x, scale_channels(y, self.ls))


class PlainBlock(Module):
    """3x3-conv residual block for the generic-CNN ablation arm (not a ResNet-101)."""

    def __init__(self, rng, dim, layer_scale_init=1e-6):
        super().__init__()
        self.norm = self.add_child("norm", LayerNorm(dim))
        self.conv1 = self.add_child("conv1", ConvAct(rng, dim, dim, 3, padding=1))
        self.conv2 = self.add_child("conv2", Conv(rng, dim, dim, 3, padding=1))
        self.ls = self.add_param("ls", np.full(dim, float(layer_scale_init)))

    def __call__(self, x):
        y = self.conv2(self.conv1(self.norm(x)))
        return add(x, scale_channels(y, self.ls))


class Downsample(Module):
    def __init__(self, rng, dim):
        super().__init__()
        self.norm = self.add_child("norm", LayerNorm(dim))
        self.conv = self.add_child("conv", Conv(rng, dim, 2 * dim, 2, stride=2))

    def __call__(self, x):
        h, w = x.shape[2:]
        if h % 2 or w % 2:
            raise DimensionError(f"downsample needs even spatial dims, got {h}x{w}")
        return self.conv(self.norm(x))


class Stage(Module):
    def __init__(self, rng, dim, depth, cfg, downsample):
        super().__init__()
        self.down = self.add_child("down", Downsample(rng, dim // 2)) if downsample else None
        block = ConvNeXtBlock if cfg.kind == "convnext" else PlainBlock
        self.blocks = [
            self.add_child(f"block{k}", block(rng, dim, cfg.layer_scale_init)) for k in range(depth)
        ]

    def __call__(self, x):
        if self.down is not None:
            x = self.down(x)
        for blk in self.blocks:
            x = blk(x)
        return x


class Encoder(Module):
    def __init__(self, cfg, rng):
        super().__init__()
        self.cfg = cfg
        self.stem = self.add_child("stem", Stem(rng, cfg.width))
        dims = cfg.stage_channels
        self.stages = [
            self.add_child(f"stage{i + 1}", Stage(rng, dims[i], cfg.blocks[i], cfg, downsample=i > 0))
            for i in range(4)
        ]

    def __call__(self, image):
        x0 = self.stem(image)
        xs = []
        x = x0
        for stage in self.stages:
            x = stage(x)
            xs.append(x)
        return StageOutputs(x0, *xs)


def encode(image, encoder):
    return encoder(image)
