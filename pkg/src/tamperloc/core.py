"""Minimal dense-tensor engine with reverse-mode differentiation.

Activations are float64 arrays in NCHW layout. Every op records a closure
that maps the output gradient to its parents' gradients; ``Tensor.backward``
walks the recorded graph in reverse topological order.

All reductions go through fixed-order numpy loops or single-threaded BLAS
calls, so repeated evaluation is bit-identical.
"""
from __future__ import annotations

import threading
from contextlib import contextmanager

import numpy as np
from scipy.special import erf

__all__ = [
    "Tensor",
    "ConvParams",
    "DimensionError",
    "ConfigurationError",
    "NumericError",
    "as_tensor",
    "no_grad",
    "conv2d",
    "depthwise_conv2d",
    "layer_norm",
    "gelu",
    "bilinear_resize",
    "adaptive_avg_pool",
    "softmax_channels",
    "add",
    "concat_channels",
    "scale_channels",
    "select_channels",
    "interp_matrix",
    "pool_matrix",
]


class DimensionError(ValueError):
    pass


class ConfigurationError(ValueError):
    pass


class NumericError(ArithmeticError):
    pass


class Tensor:
    """A float64 array with an optional gradient buffer and graph links."""

    __slots__ = ("data", "grad", "requires_grad", "name", "_parents", "_backward")

    def __init__(self, data, requires_grad=False, name=None):
        # ascontiguousarray would promote 0-d scalars to shape (1,)
        arr = np.array(data, dtype=np.float64, order="C", copy=None)
        if any(d < 1 for d in arr.shape):
            raise DimensionError(f"all dimensions must be >= 1, got shape {arr.shape}")
        self.data = arr
        self.grad = None
        self.requires_grad = requires_grad
        self.name = name
        self._parents = ()
        self._backward = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    def __repr__(self):
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}{tag}, requires_grad={self.requires_grad})"

    def numpy(self):
        return self.data

    def detach(self):
        return Tensor(self.data.copy())

    def zero_grad(self):
        self.grad = None

    def backward(self, grad=None):
        """Accumulate d(self)/d(leaf) into ``.grad`` of every reachable tensor."""
        if grad is None:
            grad = np.ones_like(self.data)
        grad = np.asarray(grad, dtype=np.float64)
        if grad.shape != self.shape:
            raise DimensionError(f"seed gradient shape {grad.shape} != tensor shape {self.shape}")

        order = []
        seen = set()
        stack = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if parent.requires_grad and id(parent) not in seen:
                    stack.append((parent, False))

        pending = {id(self): grad}
        for node in reversed(order):
            g = pending.pop(id(node), None)
            if g is None:
                continue
            node.grad = g if node.grad is None else node.grad + g
            if node._backward is None:
                continue
            for parent, pg in zip(node._parents, node._backward(g)):
                if pg is None or not parent.requires_grad:
                    continue
                key = id(parent)
                pending[key] = pg if key not in pending else pending[key] + pg


def as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


_state = threading.local()


def _grad_enabled():
    return getattr(_state, "grad_enabled", True)


@contextmanager
def no_grad():
    """Evaluate ops without recording the graph (per thread)."""
    prev = _grad_enabled()
    _state.grad_enabled = False
    try:
        yield
    finally:
        _state.grad_enabled = prev


def _result(data, parents, backward):
    out = Tensor(data)
    if _grad_enabled() and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward
    return out


def _check_nchw(x, op):
    if x.ndim != 4:
        raise DimensionError(f"{op}: expected NCHW input, got shape {x.shape}")


class ConvParams:
    """Weights (C_out, C_in/groups, kH, kW), bias (C_out,), stride, padding, groups."""

    def __init__(self, weight, bias=None, stride=1, padding=0, groups=1):
        self.weight = as_tensor(weight)
        if self.weight.ndim != 4:
            raise DimensionError(f"conv weight must be rank 4, got shape {self.weight.shape}")
        c_out = self.weight.shape[0]
        self.bias = as_tensor(np.zeros(c_out)) if bias is None else as_tensor(bias)
        if self.bias.shape != (c_out,):
            raise DimensionError(f"bias shape {self.bias.shape} does not match C_out={c_out}")
        if stride < 1 or padding < 0 or groups < 1:
            raise ConfigurationError(
                f"invalid stride/padding/groups: {stride}/{padding}/{groups}")
        if c_out % groups:
            raise ConfigurationError(f"groups={groups} does not divide C_out={c_out}")
        self.stride = int(stride)
        self.padding = int(padding)
        self.groups = int(groups)

    @property
    def c_out(self):
        return self.weight.shape[0]

    @property
    def c_in(self):
        return self.weight.shape[1] * self.groups

    @property
    def kernel(self):
        return self.weight.shape[2:]


def _conv_geometry(x, p):
    _check_nchw(x, "conv2d")
    n, c, h, w = x.shape
    if c != p.c_in:
        raise DimensionError(f"conv2d: channel axis mismatch, input C={c} but kernel expects C_in={p.c_in}")
    kh, kw = p.kernel
    if h + 2 * p.padding < kh:
        raise DimensionError(f"conv2d: height axis too small, H+2*pad={h + 2 * p.padding} < kH={kh}")
    if w + 2 * p.padding < kw:
        raise DimensionError(f"conv2d: width axis too small, W+2*pad={w + 2 * p.padding} < kW={kw}")
    ho = (h + 2 * p.padding - kh) // p.stride + 1
    wo = (w + 2 * p.padding - kw) // p.stride + 1
    return n, c, h, w, kh, kw, ho, wo


def _pad(a, pad):
    if pad == 0:
        return a
    return np.pad(a, ((0, 0), (0, 0), (pad, pad), (pad, pad)))


def _im2col(xp, kh, kw, stride, ho, wo):
    # (N, C, Ho, Wo, kH, kW) view -> (N*Ho*Wo, C*kH*kW) with (c, kh, kw) column order
    win = np.lib.stride_tricks.sliding_window_view(xp, (kh, kw), axis=(2, 3))
    win = win[:, :, : (ho - 1) * stride + 1 : stride, : (wo - 1) * stride + 1 : stride]
    n, c = xp.shape[:2]
    return np.ascontiguousarray(win.transpose(0, 2, 3, 1, 4, 5)).reshape(n * ho * wo, c * kh * kw)


def _col2im(cols, shape_padded, kh, kw, stride, ho, wo):
    n, c = shape_padded[:2]
    cols = cols.reshape(n, ho, wo, c, kh, kw).transpose(0, 3, 4, 5, 1, 2)
    out = np.zeros(shape_padded)
    for i in range(kh):
        for j in range(kw):
            out[:, :, i : i + stride * (ho - 1) + 1 : stride, j : j + stride * (wo - 1) + 1 : stride] += cols[:, :, i, j]
    return out


def conv2d(x, p):
    """Grouped 2-D cross-correlation (no kernel flip) with bias."""
    x = as_tensor(x)
    n, c, h, w, kh, kw, ho, wo = _conv_geometry(x, p)
    if p.groups > 1 and p.groups == c == p.c_out and p.weight.shape[1] == 1:
        return depthwise_conv2d(x, p)
    g = p.groups
    cg, og = c // g, p.c_out // g
    xp = _pad(x.data, p.padding)
    wmat = p.weight.data.reshape(g, og, cg * kh * kw)
    cols = [
        _im2col(xp[:, k * cg : (k + 1) * cg], kh, kw, p.stride, ho, wo) for k in range(g)
    ]
    out = np.empty((n * ho * wo, p.c_out))
    for k in range(g):
        out[:, k * og : (k + 1) * og] = cols[k] @ wmat[k].T
    out += p.bias.data
    y = out.reshape(n, ho, wo, p.c_out).transpose(0, 3, 1, 2)

    def backward(gy):
        gmat = gy.transpose(0, 2, 3, 1).reshape(n * ho * wo, p.c_out)
        gx = gw = None
        if x.requires_grad:
            gxp = np.zeros(xp.shape)
            for k in range(g):
                gcols = gmat[:, k * og : (k + 1) * og] @ wmat[k]
                gxp[:, k * cg : (k + 1) * cg] = _col2im(
                    gcols, (n, cg) + xp.shape[2:], kh, kw, p.stride, ho, wo)
            gx = gxp[:, :, p.padding : p.padding + h, p.padding : p.padding + w] if p.padding else gxp
        if p.weight.requires_grad:
            gw = np.empty_like(wmat)
            for k in range(g):
                gw[k] = gmat[:, k * og : (k + 1) * og].T @ cols[k]
            gw = gw.reshape(p.weight.shape)
        gb = gmat.sum(axis=0) if p.bias.requires_grad else None
        return gx, gw, gb

    return _result(np.ascontiguousarray(y), (x, p.weight, p.bias), backward)


def depthwise_conv2d(x, p):
    """Per-channel convolution; requires groups == C_in == C_out."""
    x = as_tensor(x)
    n, c, h, w, kh, kw, ho, wo = _conv_geometry(x, p)
    if not (p.groups == c == p.c_out):
        raise ConfigurationError(
            f"depthwise_conv2d needs groups == C_in == C_out, got groups={p.groups}, "
            f"C_in={c}, C_out={p.c_out}")
    s = p.stride
    xp = _pad(x.data, p.padding)
    wk = p.weight.data[:, 0]
    span_h, span_w = s * (ho - 1) + 1, s * (wo - 1) + 1
    y = np.zeros((n, c, ho, wo))
    for i in range(kh):
        for j in range(kw):
            y += xp[:, :, i : i + span_h : s, j : j + span_w : s] * wk[:, i, j][None, :, None, None]
    y += p.bias.data[None, :, None, None]

    def backward(gy):
        gx = gw = None
        if x.requires_grad:
            gxp = np.zeros(xp.shape)
            for i in range(kh):
                for j in range(kw):
                    gxp[:, :, i : i + span_h : s, j : j + span_w : s] += gy * wk[:, i, j][None, :, None, None]
            gx = gxp[:, :, p.padding : p.padding + h, p.padding : p.padding + w] if p.padding else gxp
        if p.weight.requires_grad:
            gw = np.empty(p.weight.shape)
            for i in range(kh):
                for j in range(kw):
                    gw[:, 0, i, j] = (xp[:, :, i : i + span_h : s, j : j + span_w : s] * gy).sum(axis=(0, 2, 3))
        gb = gy.sum(axis=(0, 2, 3)) if p.bias.requires_grad else None
        return gx, gw, gb

    return _result(y, (x, p.weight, p.bias), backward)


def layer_norm(x, gamma, beta, eps=1e-6):
    """Normalize over the channel axis independently at every (n, h, w)."""
    x, gamma, beta = as_tensor(x), as_tensor(gamma), as_tensor(beta)
    _check_nchw(x, "layer_norm")
    c = x.shape[1]
    if gamma.shape != (c,) or beta.shape != (c,):
        raise DimensionError(
            f"layer_norm: gamma/beta shapes {gamma.shape}/{beta.shape} must be ({c},)")
    mu = x.data.mean(axis=1, keepdims=True)
    xc = x.data - mu
    var = (xc * xc).mean(axis=1, keepdims=True)
    rstd = 1.0 / np.sqrt(var + eps)
    xhat = xc * rstd
    g4 = gamma.data[None, :, None, None]
    y = xhat * g4 + beta.data[None, :, None, None]

    def backward(gy):
        gx = None
        if x.requires_grad:
            dxhat = gy * g4
            gx = rstd * (dxhat - dxhat.mean(axis=1, keepdims=True)
                         - xhat * (dxhat * xhat).mean(axis=1, keepdims=True))
        gg = (gy * xhat).sum(axis=(0, 2, 3)) if gamma.requires_grad else None
        gb = gy.sum(axis=(0, 2, 3)) if beta.requires_grad else None
        return gx, gg, gb

    return _result(y, (x, gamma, beta), backward)


_SQRT2 = np.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


def gelu(x):
    """Exact GELU, x * Phi(x)."""
    x = as_tensor(x)
    cdf = 0.5 * (1.0 + erf(x.data / _SQRT2))
    y = x.data * cdf

    def backward(gy):
        pdf = _INV_SQRT_2PI * np.exp(-0.5 * x.data * x.data)
        return (gy * (cdf + x.data * pdf),)

    return _result(y, (x,), backward)


def interp_matrix(s_in, s_out):
    """Row-stochastic (s_out, s_in) matrix of half-pixel-center linear interpolation."""
    d = np.arange(s_out, dtype=np.float64)
    src = np.clip((d + 0.5) * (s_in / s_out) - 0.5, 0.0, s_in - 1)
    i0 = np.floor(src).astype(np.int64)
    i1 = np.minimum(i0 + 1, s_in - 1)
    frac = src - i0
    m = np.zeros((s_out, s_in))
    m[np.arange(s_out), i0] += 1.0 - frac
    m[np.arange(s_out), i1] += frac
    return m


def _separable(x, rows, cols, op):
    # y = rows @ x @ cols.T on the two trailing axes
    y = np.matmul(np.matmul(rows, x.data), cols.T)

    def backward(gy):
        return (np.matmul(np.matmul(rows.T, gy), cols),)

    return _result(np.ascontiguousarray(y), (x,), backward)


def bilinear_resize(x, out_h, out_w):
    """Bilinear resampling with half-pixel centers (align_corners=False)."""
    x = as_tensor(x)
    _check_nchw(x, "bilinear_resize")
    if out_h < 1 or out_w < 1:
        raise ConfigurationError(f"bilinear_resize: output size must be >= 1, got {out_h}x{out_w}")
    h, w = x.shape[2:]
    if (out_h, out_w) == (h, w):
        return x
    return _separable(x, interp_matrix(h, out_h), interp_matrix(w, out_w), "bilinear_resize")


def pool_matrix(s_in, bins):
    """(bins, s_in) averaging matrix; bin i covers floor(i*S/b) .. ceil((i+1)*S/b)-1."""
    m = np.zeros((bins, s_in))
    for i in range(bins):
        lo = (i * s_in) // bins
        hi = -((-(i + 1) * s_in) // bins)
        m[i, lo:hi] = 1.0 / (hi - lo)
    return m


def adaptive_avg_pool(x, bins):
    x = as_tensor(x)
    _check_nchw(x, "adaptive_avg_pool")
    h, w = x.shape[2:]
    if bins < 1 or bins > min(h, w):
        raise ConfigurationError(
            f"adaptive_avg_pool: bins={bins} must lie in [1, min(H, W)] = [1, {min(h, w)}]")
    if bins == h == w:
        return x
    return _separable(x, pool_matrix(h, bins), pool_matrix(w, bins), "adaptive_avg_pool")


def softmax_channels(x):
    """Per-pixel softmax over the channel axis."""
    x = as_tensor(x)
    _check_nchw(x, "softmax_channels")
    if x.shape[1] < 2:
        raise DimensionError(f"softmax_channels needs C >= 2, got C={x.shape[1]}")
    z = x.data - x.data.max(axis=1, keepdims=True)
    e = np.exp(z)
    p = e / e.sum(axis=1, keepdims=True)

    def backward(gy):
        return (p * (gy - (gy * p).sum(axis=1, keepdims=True)),)

    return _result(p, (x,), backward)


def add(a, b):
    a, b = as_tensor(a), as_tensor(b)
    if a.shape != b.shape:
        raise DimensionError(f"add: shape mismatch {a.shape} vs {b.shape}")
    return _result(a.data + b.data, (a, b), lambda g: (g, g))


def concat_channels(tensors):
    tensors = [as_tensor(t) for t in tensors]
    if not tensors:
        raise ConfigurationError("concat_channels: empty tensor list")
    for t in tensors:
        _check_nchw(t, "concat_channels")
        if t.shape[0] != tensors[0].shape[0] or t.shape[2:] != tensors[0].shape[2:]:
            raise DimensionError(
                f"concat_channels: shapes {tensors[0].shape} and {t.shape} differ off the channel axis")
    bounds = np.cumsum([0] + [t.shape[1] for t in tensors])
    y = np.concatenate([t.data for t in tensors], axis=1)

    def backward(gy):
        return tuple(gy[:, bounds[k] : bounds[k + 1]] for k in range(len(tensors)))

    return _result(y, tensors, backward)


def scale_channels(x, scale):
    """Multiply channel c of x by scale[c] (layer scale)."""
    x, scale = as_tensor(x), as_tensor(scale)
    _check_nchw(x, "scale_channels")
    if scale.shape != (x.shape[1],):
        raise DimensionError(f"scale_channels: scale shape {scale.shape} != ({x.shape[1]},)")
    s4 = scale.data[None, :, None, None]

    def backward(gy):
        gs = (gy * x.data).sum(axis=(0, 2, 3)) if scale.requires_grad else None
        return gy * s4, gs

    return _result(x.data * s4, (x, scale), backward)


def select_channels(x, start, stop):
    x = as_tensor(x)
    _check_nchw(x, "select_channels")
    if not 0 <= start < stop <= x.shape[1]:
        raise DimensionError(f"select_channels: [{start}, {stop}) out of range for C={x.shape[1]}")

    def backward(gy):
        g = np.zeros(x.shape)
        g[:, start:stop] = gy
        return (g,)

    return _result(x.data[:, start:stop].copy(), (x,), backward)
