"""Desk-scale image tampering localization.

ConvNeXt-style encoder, UPerNet-style decoder, focal + Lovasz loss,
procedural splice synthesis with augmentation, and pixel-level metrics, all
on a small float64 reverse-mode engine.
"""
from .core import Tensor, no_grad
from .decoder import DecoderConfig
from .encoder import EncoderConfig
from .loss import LossConfig
from .model import TamperLocNet, load_checkpoint, save_checkpoint
from .trainer import TrainConfig

__version__ = "0.1.0"

__all__ = [
    "DecoderConfig",
    "EncoderConfig",
    "LossConfig",
    "TamperLocNet",
    "Tensor",
    "TrainConfig",
    "load_checkpoint",
    "no_grad",
    "save_checkpoint",
]
