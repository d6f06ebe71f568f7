"""Central-difference verification of analytic gradients."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import NumericError


@dataclass
class GradCheckReport:
    op: str
    max_error: float
    tol: float
    worst: tuple = ()
    per_input: list = field(default_factory=list)

    @property
    def passed(self):
        return self.max_error <= self.tol

    def __bool__(self):
        return self.passed


def _scalar(out, weights):
    data = out.data
    return float(data.sum()) if weights is None else float((data * weights).sum())


def grad_check(op, inputs, h=1e-3, tol=1e-4, weights=None, max_coords=None, seed=0, name=None):
    """Compare ``op``'s backward pass with central differences.

    The scalar being differentiated is ``sum(op(*inputs))``, or
    ``sum(weights * op(*inputs))`` when ``weights`` is given (needed for ops
    whose plain sum is constant, such as softmax). The discrepancy per
    coordinate is ``|analytic - cd| / max(1, |analytic|, |cd|)``.

    Only inputs with ``requires_grad`` are perturbed. ``max_coords`` limits
    the check to a random subset of coordinates per input.
    """
    name = name or getattr(op, "__name__", "op")
    if not 1e-5 <= h <= 1e-2:
        raise ValueError(f"step h={h} outside [1e-5, 1e-2]")
    for t in inputs:
        t.zero_grad()
    out = op(*inputs)
    if not np.all(np.isfinite(out.data)):
        raise NumericError(f"{name}: non-finite forward output")
    if weights is not None:
        weights = np.asarray(weights, dtype=np.float64)
    seed_grad = np.ones_like(out.data) if weights is None else weights
    out.backward(seed_grad)

    rng = np.random.default_rng(seed)
    report = GradCheckReport(op=name, max_error=0.0, tol=tol)
    for k, t in enumerate(inputs):
        if not t.requires_grad:
            continue
        analytic = np.zeros(t.shape) if t.grad is None else t.grad.copy()
        if not np.all(np.isfinite(analytic)):
            raise NumericError(f"{name}: non-finite analytic gradient for input {k}")
        flat = t.data.reshape(-1)
        coords = np.arange(flat.size)
        if max_coords is not None and flat.size > max_coords:
            coords = np.sort(rng.choice(flat.size, size=max_coords, replace=False))
        worst_here = 0.0
        for idx in coords:
            orig = flat[idx]
            flat[idx] = orig + h
            fp = _scalar(op(*inputs), weights)
            flat[idx] = orig - h
            fm = _scalar(op(*inputs), weights)
            flat[idx] = orig
            if not (np.isfinite(fp) and np.isfinite(fm)):
                raise NumericError(f"{name}: non-finite value while perturbing input {k}")
            cd = (fp - fm) / (2.0 * h)
            a = analytic.reshape(-1)[idx]
            err = abs(a - cd) / max(1.0, abs(a), abs(cd))
            if err > worst_here:
                worst_here = err
            if err > report.max_error:
                report.max_error = err
                report.worst = (k, int(idx), float(a), float(cd))
        report.per_input.append((k, worst_here))
    return report


def directional_check(fn, params, h=1e-4, n_dirs=3, seed=0):
    """Relative error between <grad, v> and a central difference along v.

    ``fn`` maps the current parameter values to a scalar Tensor. Checks the
    full Jacobian-vector product at once, which scales to whole networks.
    """
    for p in params:
        p.zero_grad()
    loss = fn()
    loss.backward()
    grads = [np.zeros(p.shape) if p.grad is None else p.grad.copy() for p in params]
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_dirs):
        dirs = [rng.standard_normal(p.shape) for p in params]
        norm = np.sqrt(sum(float((d * d).sum()) for d in dirs))
        dirs = [d / norm for d in dirs]
        jvp = sum(float((g * d).sum()) for g, d in zip(grads, dirs))
        base = [p.data.copy() for p in params]
        for p, b, d in zip(params, base, dirs):
            p.data[...] = b + h * d
        fp = float(fn().data.sum())
        for p, b, d in zip(params, base, dirs):
            p.data[...] = b - h * d
        fm = float(fn().data.sum())
        for p, b in zip(params, base):
            p.data[...] = b
        cd = (fp - fm) / (2.0 * h)
        err = abs(jvp - cd) / max(abs(jvp), abs(cd), 1e-12)
        worst = max(worst, err)
    return worst
