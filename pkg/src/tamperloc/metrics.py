"""Pixel-level F1, IOU and AUC with 'tampered' as the positive class."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import rankdata


class UndefinedAUC(ValueError):
    """Ground truth holds a single class, so ROC is undefined."""


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def total(self):
        return self.tp + self.fp + self.fn + self.tn


def confusion(pred_mask, gt_mask):
    pred = np.asarray(pred_mask).astype(bool)
    gt = np.asarray(gt_mask).astype(bool)
    if pred.shape != gt.shape:
        raise ValueError(f"prediction shape {pred.shape} != ground-truth shape {gt.shape}")
    tp = int(np.count_nonzero(pred & gt))
    fp = int(np.count_nonzero(pred & ~gt))
    fn = int(np.count_nonzero(~pred & gt))
    return ConfusionCounts(tp, fp, fn, pred.size - tp - fp - fn)


def f1_iou(c):
    """(f1, iou); both are 1 when there is nothing to find and nothing was found."""
    denom = c.tp + c.fp + c.fn
    if denom == 0:
        return 1.0, 1.0
    return 2 * c.tp / (2 * c.tp + c.fp + c.fn), c.tp / denom


def pixel_auc(probs, gt_mask):
    """Mann-Whitney AUC with midranks for tied scores."""
    scores = np.asarray(probs, dtype=np.float64).ravel()
    gt = np.asarray(gt_mask).astype(bool).ravel()
    if scores.shape != gt.shape:
        raise ValueError(f"probability map size {scores.size} != mask size {gt.size}")
    n_pos = int(gt.sum())
    n_neg = gt.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedAUC("AUC undefined: ground truth contains a single class")
    ranks = rankdata(scores, method="average")
    r_pos = ranks[gt].sum()
    return float((r_pos - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


@dataclass
class ImageMetrics:
    name: str
    auc: float
    f1: float
    iou: float
    counts: ConfusionCounts


@dataclass
class MetricsReport:
    threshold: float
    images: list = field(default_factory=list)

    @property
    def mean_f1(self):
        return float(np.mean([m.f1 for m in self.images])) if self.images else math.nan

    @property
    def mean_iou(self):
        return float(np.mean([m.iou for m in self.images])) if self.images else math.nan

    @property
    def mean_auc(self):
        vals = [m.auc for m in self.images if not math.isnan(m.auc)]
        return float(np.mean(vals)) if vals else math.nan

    @property
    def auc_excluded(self):
        return [m.name for m in self.images if math.isnan(m.auc)]

    def to_csv(self):
        rows = ["image,auc,f1,iou"]
        for m in self.images:
            rows.append(f"{m.name},{_fmt(m.auc)},{_fmt(m.f1)},{_fmt(m.iou)}")
        return "\n".join(rows) + "\n"

    def to_table(self):
        width = max([len("image"), len("mean")] + [len(m.name) for m in self.images])
        lines = [f"{'image':<{width}}  {'auc':>8}  {'f1':>8}  {'iou':>8}"]
        for m in self.images:
            lines.append(f"{m.name:<{width}}  {_fmt(m.auc):>8}  {_fmt(m.f1):>8}  {_fmt(m.iou):>8}")
        lines.append(f"{'mean':<{width}}  {_fmt(self.mean_auc):>8}  {_fmt(self.mean_f1):>8}  {_fmt(self.mean_iou):>8}")
        lines.append(f"threshold = {self.threshold:g}")
        if self.auc_excluded:
            lines.append("auc undefined (single-class ground truth): " + ", ".join(self.auc_excluded))
        return "\n".join(lines) + "\n"


def _fmt(v):
    return "nan" if math.isnan(v) else f"{v:.6f}"


def evaluate_image(name, probs, gt_mask, threshold=0.5):
    probs = np.asarray(probs, dtype=np.float64)
    counts = confusion(probs > threshold, gt_mask)
    f1, iou = f1_iou(counts)
    try:
        auc = pixel_auc(probs, gt_mask)
    except UndefinedAUC:
        warnings.warn(f"{name}: AUC undefined for single-class ground truth; excluded from mean")
        auc = math.nan
    return ImageMetrics(name, auc, f1, iou, counts)


def evaluate(named_maps, threshold=0.5):
    """Metrics for an iterable of (name, probs, gt_mask); dataset means are unweighted."""
    report = MetricsReport(threshold=threshold)
    for name, probs, gt in named_maps:
        report.images.append(evaluate_image(name, probs, gt, threshold))
    return report
