"""AdamW with linear warmup and poly decay, and the seeded training loop."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import ConfigurationError, NumericError, Tensor, no_grad
from .loss import LossConfig, logits_loss
from .metrics import confusion, f1_iou
from .model import preprocess, save_checkpoint
from .rng import stream

log = logging.getLogger(__name__)


class TrainingDiverged(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    base_lr: float = 1e-4
    warmup_iters: int = 1500
    warmup_ratio: float = 0.01
    max_iters: int = 160_000
    poly_power: float = 0.9
    batch_size: int = 4
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    weight_decay: float = 0.05
    clip_norm: float = 0.0
    seed: int = 0
    log_every: int = 50
    checkpoint_every: int = 0

    def __post_init__(self):
        if not 0 <= self.warmup_iters < self.max_iters:
            raise ConfigurationError(
                f"warmup_iters ({self.warmup_iters}) must be < max_iters ({self.max_iters})")
        if self.batch_size < 1:
            raise ConfigurationError(f"batch_size must be >= 1, got {self.batch_size}")

    @classmethod
    def desk(cls, **kw):
        return cls(**{"base_lr": 2e-3, "warmup_iters": 100, "max_iters": 1000,
                      "weight_decay": 0.0, "log_every": 25, **kw})


def lr_at(t, cfg):
    """Learning rate at iteration ``t``: linear warmup then poly decay to zero."""
    if not 0 <= t <= cfg.max_iters:
        raise ValueError(f"iteration {t} outside [0, {cfg.max_iters}]")
    if t < cfg.warmup_iters:
        r0 = cfg.warmup_ratio
        return cfg.base_lr * (r0 + (1.0 - r0) * t / cfg.warmup_iters)
    progress = (t - cfg.warmup_iters) / (cfg.max_iters - cfg.warmup_iters)
    return cfg.base_lr * (1.0 - progress) ** cfg.poly_power


def decays(name, param):
    # norm scales/shifts, biases and layer-scale vectors are all 1-D
    return param.ndim > 1


@dataclass
class OptimizerState:
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    step: int = 0


def adamw_step(named_params, state, lr, cfg):
    """One decoupled-weight-decay Adam update, in place.

    ``named_params`` is a list of (name, Tensor) with ``.grad`` filled in.
    Raises NumericError naming the first parameter with a non-finite gradient
    before touching any parameter.
    """
    grads = []
    for name, p in named_params:
        g = np.zeros(p.shape) if p.grad is None else p.grad
        if g.shape != p.shape:
            raise ValueError(f"{name}: gradient shape {g.shape} != parameter shape {p.shape}")
        if not np.all(np.isfinite(g)):
            raise NumericError(f"non-finite gradient for parameter {name}")
        grads.append(g)
    if cfg.clip_norm > 0:
        total = math.sqrt(sum(float((g * g).sum()) for g in grads))
        if total > cfg.clip_norm:
            grads = [g * (cfg.clip_norm / total) for g in grads]

    state.step += 1
    t = state.step
    b1, b2 = cfg.beta1, cfg.beta2
    c1, c2 = 1.0 - b1**t, 1.0 - b2**t
    for (name, p), g in zip(named_params, grads):
        m = state.m.get(name)
        if m is None:
            m = state.m[name] = np.zeros(p.shape)
            state.v[name] = np.zeros(p.shape)
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        if cfg.weight_decay and decays(name, p):
            p.data -= lr * cfg.weight_decay * p.data
        p.data -= lr * (m / c1) / (np.sqrt(v / c2) + cfg.adam_eps)
    return state


def batch_f1(probs, masks, threshold=0.5):
    scores = [f1_iou(confusion(p > threshold, m))[0] for p, m in zip(probs, masks)]
    return float(np.mean(scores))


@dataclass
class TrainResult:
    curve: list
    initial_loss: float
    final_loss: float
    state: OptimizerState


def train(net, images, masks, cfg, loss_cfg=LossConfig(), out_dir=None, on_log=None):
    """Train ``net`` in place on uint8 images (N, H, W, 3) and binary masks (N, H, W).

    Batches come from a per-epoch permutation drawn from a stream keyed by
    (seed, epoch). Returns the logged curve as (iter, lr, loss, f1) rows;
    F1 is measured on the current batch at threshold 0.5.
    """
    images = np.asarray(images)
    masks = np.asarray(masks)
    n = len(images)
    if n == 0:
        raise ValueError("empty dataset")
    x_all = preprocess(images).data
    named = list(net.named_parameters())
    state = OptimizerState()
    curve = []
    order = []
    epoch = 0
    first_loss = None
    loss_val = math.nan
    for it in range(cfg.max_iters):
        if len(order) < cfg.batch_size:
            perm = stream(cfg.seed, f"shuffle/{epoch}").permutation(n)
            order.extend(int(i) for i in perm)
            epoch += 1
        idx, order = order[: cfg.batch_size], order[cfg.batch_size :]
        lr = lr_at(it, cfg)
        net.zero_grad()
        out = net(Tensor(x_all[idx]))
        try:
            loss = logits_loss(out.logits, masks[idx], loss_cfg)
        except NumericError as exc:
            raise TrainingDiverged(f"iteration {it}: {exc} (batch indices {idx})") from None
        loss_val = float(loss.data)
        if not math.isfinite(loss_val):
            raise TrainingDiverged(f"iteration {it}: non-finite loss on batch indices {idx}")
        if first_loss is None:
            first_loss = loss_val
        loss.backward()
        try:
            adamw_step(named, state, lr, cfg)
        except NumericError as exc:
            raise TrainingDiverged(f"iteration {it}: {exc} (batch indices {idx})") from None
        if it % cfg.log_every == 0 or it == cfg.max_iters - 1:
            f1 = batch_f1(out.probs.data[:, 0], masks[idx])
            curve.append((it, lr, loss_val, f1))
            if on_log is not None:
                on_log(it, lr, loss_val, f1)
            log.debug("iter %d lr %.3e loss %.5f f1 %.4f", it, lr, loss_val, f1)
        if out_dir is not None and cfg.checkpoint_every and (it + 1) % cfg.checkpoint_every == 0:
            save_checkpoint(net, Path(out_dir) / f"checkpoint_{it + 1:06d}.bin")
    return TrainResult(curve=curve, initial_loss=first_loss, final_loss=loss_val, state=state)


def evaluate_f1(net, images, masks, threshold=0.5, batch_size=8):
    """Mean per-image F1 of the network on a set of samples."""
    probs = []
    with no_grad():
        for k in range(0, len(images), batch_size):
            probs.append(net.predict(images[k : k + batch_size]))
    return batch_f1(np.concatenate(probs), masks, threshold)


def write_curve(path, curve):
    rows = ["iter,lr,loss,f1"] + [f"{i},{lr:.10e},{loss:.10e},{f1:.6f}" for i, lr, loss, f1 in curve]
    Path(path).write_text("\n".join(rows) + "\n")


def dataset_loss(net, images, masks, loss_cfg=LossConfig(), batch_size=8):
    """Mean loss over the whole set, batch by batch, without recording a graph."""
    total = 0.0
    with no_grad():
        for k in range(0, len(images), batch_size):
            out = net(preprocess(images[k : k + batch_size]))
            part = float(logits_loss(out.logits, masks[k : k + batch_size], loss_cfg).data)
            total += part * len(out.logits.data)
    return total / len(images)
