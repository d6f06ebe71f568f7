"""Forgery synthesis, augmentation, JPEG round trip and dataset layout."""
from .augment import AugmentConfig, augment, replay_geometry
from .jpeg import jpeg_roundtrip, psnr
from .synth import (
    CompositeError,
    ForgerySample,
    composite,
    laplacian_energy,
    procedural_corpus,
    procedural_sample,
)

__all__ = [
    "AugmentConfig",
    "CompositeError",
    "ForgerySample",
    "augment",
    "composite",
    "jpeg_roundtrip",
    "laplacian_energy",
    "procedural_corpus",
    "procedural_sample",
    "psnr",
    "replay_geometry",
]
