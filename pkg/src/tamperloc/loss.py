"""Focal loss, Lovasz hinge on the Jaccard index, and their weighted sum.

The two-class head yields, per pixel, a tampered probability ``p`` and a
signed score ``s = z_tampered - z_pristine`` with ``p = sigmoid(s)``. Focal
works on ``p``. The Lovasz term reads the hinge margins as
``max(1 - s * y, 0)`` with labels in {-1, +1}; a probability in place of
``s`` would make every negative pixel's margin at least 1.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import ConfigurationError, NumericError, _result


@dataclass(frozen=True)
class LossConfig:
    alpha: float = 0.25
    gamma: float = 2.0
    lambda1: float = 1.0
    lambda2: float = 1.0
    eps: float = 1e-7
    kind: str = "combined"

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ConfigurationError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.gamma < 0:
            raise ConfigurationError(f"gamma must be >= 0, got {self.gamma}")
        if self.lambda1 < 0 or self.lambda2 < 0 or self.lambda1 + self.lambda2 <= 0:
            raise ConfigurationError(
                f"lambda1, lambda2 must be non-negative with positive sum, got {self.lambda1}, {self.lambda2}")
        if self.kind not in ("combined", "ce"):
            raise ConfigurationError(f"loss kind must be 'combined' or 'ce', got {self.kind!r}")


@dataclass
class PixelBatch:
    p: np.ndarray
    s: np.ndarray
    y01: np.ndarray
    ypm: np.ndarray

    @classmethod
    def from_scores(cls, s, y01):
        s = np.asarray(s, dtype=np.float64).ravel()
        y01 = np.asarray(y01, dtype=np.float64).ravel()
        if s.shape != y01.shape:
            raise ValueError(f"scores {s.shape} and labels {y01.shape} differ in length")
        return cls(p=sigmoid(s), s=s, y01=y01, ypm=2.0 * y01 - 1.0)

    @classmethod
    def from_probs(cls, p, y01):
        p = np.asarray(p, dtype=np.float64).ravel()
        with np.errstate(divide="ignore"):
            s = np.log(p) - np.log1p(-p)
        y01 = np.asarray(y01, dtype=np.float64).ravel()
        return cls(p=p, s=s, y01=y01, ypm=2.0 * y01 - 1.0)


def sigmoid(s):
    out = np.empty_like(s, dtype=np.float64)
    pos = s >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-s[pos]))
    e = np.exp(s[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def _check_finite(name, *arrays):
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise NumericError(f"{name}: non-finite input")


def focal_loss(b, cfg=LossConfig()):
    """Mean focal loss and its gradient with respect to ``p``."""
    _check_finite("focal_loss", b.p, b.y01)
    eps, a, g = cfg.eps, cfg.alpha, cfg.gamma
    clamped = (b.p < eps) | (b.p > 1.0 - eps)
    p = np.clip(b.p, eps, 1.0 - eps)
    q = 1.0 - p
    y = b.y01
    lp, lq = np.log(p), np.log(q)
    qg, pg = q**g, p**g
    per = -a * qg * y * lp - (1.0 - a) * pg * (1.0 - y) * lq
    n = per.size
    # d/dp of each term; gamma * x**(gamma-1) vanishes at gamma == 0
    dq_g = g * q ** (g - 1.0) if g != 0 else 0.0
    dp_g = g * p ** (g - 1.0) if g != 0 else 0.0
    d_pos = -a * (-dq_g * lp + qg / p)
    d_neg = -(1.0 - a) * (dp_g * lq - pg / q)
    grad = (y * d_pos + (1.0 - y) * d_neg) / n
    grad[clamped] = 0.0
    return float(per.sum() / n), grad


def cross_entropy(b, eps=1e-7):
    """Mean binary cross-entropy and its gradient with respect to ``p``."""
    _check_finite("cross_entropy", b.p, b.y01)
    clamped = (b.p < eps) | (b.p > 1.0 - eps)
    p = np.clip(b.p, eps, 1.0 - eps)
    y = b.y01
    n = p.size
    value = -(y * np.log(p) + (1.0 - y) * np.log1p(-p)).sum() / n
    grad = (-y / p + (1.0 - y) / (1.0 - p)) / n
    grad[clamped] = 0.0
    return float(value), grad


def lovasz_grad(gt_sorted):
    """Discrete gradient of the Jaccard loss along a sorted chain.

    Returns zeros when the chain holds no positives.
    """
    gt = np.asarray(gt_sorted, dtype=np.float64)
    total = gt.sum()
    if total == 0:
        return np.zeros_like(gt)
    intersection = total - np.cumsum(gt)
    union = total + np.cumsum(1.0 - gt)
    jac = 1.0 - intersection / union
    g = jac.copy()
    g[1:] = jac[1:] - jac[:-1]
    return g


def lovasz_loss(b):
    """Lovasz hinge for one image: value and gradient with respect to ``s``."""
    _check_finite("lovasz_loss", b.s, b.ypm)
    margins = np.maximum(1.0 - b.s * b.ypm, 0.0)
    order = np.argsort(-margins, kind="stable")
    g = lovasz_grad(b.y01[order])
    value = float(np.dot(margins[order], g))
    grad = np.zeros_like(margins)
    grad[order] = g
    grad *= -b.ypm * (margins > 0)
    return value, grad


def combined_loss(b, cfg=LossConfig()):
    """lambda1 * focal + lambda2 * lovasz; gradient with respect to ``s``."""
    value = 0.0
    grad = np.zeros_like(b.s)
    if cfg.lambda1:
        fv, fg = focal_loss(b, cfg)
        value += cfg.lambda1 * fv
        grad += cfg.lambda1 * fg * b.p * (1.0 - b.p)
    if cfg.lambda2:
        lv, lg = lovasz_loss(b)
        value += cfg.lambda2 * lv
        grad += cfg.lambda2 * lg
    return value, grad


def batch_loss(scores, masks, cfg=LossConfig()):
    """Loss over an (N, H, W) score map: focal/CE mean over all pixels, Lovasz per image then averaged.

    Returns the value and the gradient with respect to ``scores``.
    """
    scores = np.asarray(scores, dtype=np.float64)
    masks = np.asarray(masks, dtype=np.float64)
    n = scores.shape[0]
    whole = PixelBatch.from_scores(scores, masks)
    dpds = whole.p * (1.0 - whole.p)
    if cfg.kind == "ce":
        value, gp = cross_entropy(whole, cfg.eps)
        return value, (gp * dpds).reshape(scores.shape)
    value = 0.0
    grad = np.zeros(scores.size)
    if cfg.lambda1:
        fv, fg = focal_loss(whole, cfg)
        value += cfg.lambda1 * fv
        grad += cfg.lambda1 * fg * dpds
    if cfg.lambda2:
        per = scores[0].size
        for k in range(n):
            sl = slice(k * per, (k + 1) * per)
            part = PixelBatch(whole.p[sl], whole.s[sl], whole.y01[sl], whole.ypm[sl])
            lv, lg = lovasz_loss(part)
            value += cfg.lambda2 * lv / n
            grad[sl] += cfg.lambda2 * lg / n
    return value, grad.reshape(scores.shape)


def logits_loss(logits, masks, cfg=LossConfig()):
    """Scalar Tensor loss from (N, 2, H, W) logits; channel 1 is 'tampered'."""
    z = logits.data
    scores = z[:, 1] - z[:, 0]
    value, gs = batch_loss(scores, masks, cfg)

    def backward(g):
        gz = np.empty_like(z)
        gz[:, 1] = g.reshape(()) * gs
        gz[:, 0] = -gz[:, 1]
        return (gz,)

    return _result(np.array(value), (logits,), backward)
