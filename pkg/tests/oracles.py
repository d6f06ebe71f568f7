"""Slow, independent reference implementations used only by the tests."""
import itertools

import numpy as np


def jaccard_set_loss(mispredicted, positives):
    """|M| / |P u M| evaluated with Python sets; 0 for an empty set."""
    m = set(mispredicted)
    if not m:
        return 0.0
    return len(m) / len(set(positives) | m)


def lovasz_extension(margins, labels):
    """Choquet integral of the Jaccard set loss over the level sets of ``margins``.

    f(m) = sum_k (t_k - t_{k+1}) * Delta({i : m_i >= t_k}) over the distinct
    positive levels t_1 > t_2 > ... (t_{K+1} = 0). Batches with no positive
    label score 0, matching the library convention.
    """
    positives = [i for i, y in enumerate(labels) if y]
    if not positives:
        return 0.0
    levels = sorted({float(v) for v in margins if v > 0}, reverse=True)
    total = 0.0
    for k, t in enumerate(levels):
        nxt = levels[k + 1] if k + 1 < len(levels) else 0.0
        level_set = [i for i, v in enumerate(margins) if v >= t]
        total += (t - nxt) * jaccard_set_loss(level_set, positives)
    return total


def hinge_margins(scores, labels):
    return [max(1.0 - s * (2 * y - 1), 0.0) for s, y in zip(scores, labels)]


def all_labelings(n):
    return [list(bits) for bits in itertools.product((0, 1), repeat=n)]


def naive_confusion(pred, gt):
    tp = fp = fn = tn = 0
    for p, g in zip(np.asarray(pred).ravel().tolist(), np.asarray(gt).ravel().tolist()):
        if p and g:
            tp += 1
        elif p and not g:
            fp += 1
        elif not p and g:
            fn += 1
        else:
            tn += 1
    return tp, fp, fn, tn


def trapezoid_auc(scores, gt):
    """Area under the ROC polyline through every distinct threshold."""
    scores = np.asarray(scores, dtype=np.float64).ravel()
    gt = np.asarray(gt).astype(bool).ravel()
    n_pos, n_neg = gt.sum(), (~gt).sum()
    tpr, fpr = [0.0], [0.0]
    for t in sorted(set(scores.tolist()), reverse=True):
        above = scores >= t
        tpr.append((above & gt).sum() / n_pos)
        fpr.append((above & ~gt).sum() / n_neg)
    area = 0.0
    for k in range(1, len(tpr)):
        area += (fpr[k] - fpr[k - 1]) * (tpr[k] + tpr[k - 1]) / 2.0
    return area


def dense_from_depthwise(w):
    """(C, 1, k, k) depthwise kernel -> equivalent block-diagonal (C, C, k, k) dense kernel."""
    c, _, kh, kw = w.shape
    dense = np.zeros((c, c, kh, kw))
    for i in range(c):
        dense[i, i] = w[i, 0]
    return dense


def conv2d_loops(x, w, b, stride, pad):
    """Direct six-loop cross-correlation."""
    n, c, h, wd = x.shape
    o, _, kh, kw = w.shape
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    ho = (h + 2 * pad - kh) // stride + 1
    wo = (wd + 2 * pad - kw) // stride + 1
    y = np.zeros((n, o, ho, wo))
    for a in range(n):
        for oc in range(o):
            for i in range(ho):
                for j in range(wo):
                    patch = xp[a, :, i * stride : i * stride + kh, j * stride : j * stride + kw]
                    y[a, oc, i, j] = (patch * w[oc]).sum() + b[oc]
    return y


def adam_scalar(theta0, grad_fn, steps, lr, b1=0.9, b2=0.999, eps=1e-8):
    """Plain-Python scalar Adam."""
    th, m, v = theta0, 0.0, 0.0
    for t in range(1, steps + 1):
        g = grad_fn(th)
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        th -= lr * (m / (1 - b1**t)) / ((v / (1 - b2**t)) ** 0.5 + eps)
    return th
