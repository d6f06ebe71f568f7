"""Desk-scale experiments shared by the acceptance suite and the demos."""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .dataforge.augment import AugmentConfig
from .dataforge.dataset import make_sample
from .decoder import DecoderConfig
from .encoder import EncoderConfig
from .loss import LossConfig
from .model import TamperLocNet
from .rng import stream
from .trainer import TrainConfig, dataset_loss, evaluate_f1, train


@dataclass
class RunSummary:
    f1: float
    initial_loss: float
    final_loss: float
    seconds: float
    curve: list

    @property
    def loss_ratio(self):
        return self.final_loss / self.initial_loss


def desk_corpus(n=16, size=64, seed=0):
    """Images (N, H, W, 3) and masks (N, H, W) of the augmented procedural corpus."""
    samples = [make_sample(i, size, seed, AugmentConfig.desk(crop=(size, size))) for i in range(n)]
    return np.stack([s.image for s in samples]), np.stack([s.mask for s in samples])


def shuffle_labels(masks, seed):
    """Permute mask pixels within each image: same tampered ratio, no spatial signal."""
    out = np.empty_like(masks)
    for k, m in enumerate(masks):
        out[k] = stream(seed, f"negative/{k}").permutation(m.ravel()).reshape(m.shape)
    return out


def fit(images, masks, seed=0, iters=1000, fuse="X4,X3,X2,X1", loss="combined", on_log=None):
    """Train a fresh desk network and measure F1 and mean loss on the training set."""
    net = TamperLocNet(EncoderConfig.desk(), DecoderConfig.desk(fuse=fuse), seed=seed)
    loss_cfg = LossConfig(kind=loss)
    before = dataset_loss(net, images, masks, loss_cfg)
    start = time.perf_counter()
    result = train(net, images, masks, TrainConfig.desk(max_iters=iters, seed=seed), loss_cfg, on_log=on_log)
    seconds = time.perf_counter() - start
    after = dataset_loss(net, images, masks, loss_cfg)
    return RunSummary(evaluate_f1(net, images, masks), before, after, seconds, result.curve)
