"""The finite-difference gradient suite: every differentiable op plus the whole network.

Per-op cases use coordinate-wise central differences with tolerance 1e-4.
End-to-end cases check the desk network's loss gradient with tolerance 1e-3,
both along random directions and on sampled parameter coordinates.
Parameters are jittered away from their initial values first, so layer
scales and zero biases do not make the check vacuous.
"""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .core import (
    ConvParams, Tensor, adaptive_avg_pool, add, bilinear_resize, concat_channels, conv2d,
    depthwise_conv2d, gelu, layer_norm, scale_channels, select_channels, softmax_channels,
)
from .decoder import PPM, DecoderConfig, FuseHead, Lateral
from .encoder import ConvNeXtBlock, Downsample, EncoderConfig, PlainBlock, Stem
from .gradcheck import directional_check, grad_check
from .loss import LossConfig, logits_loss
from .model import TamperLocNet, preprocess
from .rng import stream

OP_TOL = 1e-4
NETWORK_TOL = 1e-3
H = 1e-5


@dataclass
class CaseResult:
    name: str
    error: float
    tol: float
    seconds: float

    @property
    def passed(self):
        return self.error <= self.tol


def _jitter(module, rng, scale=0.3):
    for _, p in module.named_parameters():
        p.data[...] += scale * rng.standard_normal(p.shape)
    return module


def _op_cases(rng):
    def t(*shape):
        return Tensor(rng.standard_normal(shape), requires_grad=True)

    def w(*shape):
        return rng.standard_normal(shape)

    conv_w, conv_b = t(3, 2, 3, 3), t(3)
    dw_w, dw_b = t(2, 1, 7, 7), t(2)
    return [
        ("conv2d", lambda x, a, b: conv2d(x, ConvParams(a, b, 1, 1)), [t(2, 2, 5, 5), conv_w, conv_b], None),
        ("conv2d/stride2", lambda x, a, b: conv2d(x, ConvParams(a, b, 2, 1)), [t(1, 2, 6, 6), conv_w, conv_b], None),
        ("depthwise_conv2d", lambda x, a, b: depthwise_conv2d(x, ConvParams(a, b, 1, 3, 2)),
         [t(1, 2, 6, 6), dw_w, dw_b], None),
        ("layer_norm", layer_norm, [t(2, 4, 3, 3), t(4), t(4)], w(2, 4, 3, 3)),
        ("gelu", gelu, [t(2, 3, 4)], None),
        ("bilinear_resize/up", lambda x: bilinear_resize(x, 7, 5), [t(1, 2, 3, 4)], w(1, 2, 7, 5)),
        ("bilinear_resize/down", lambda x: bilinear_resize(x, 3, 2), [t(1, 2, 8, 5)], w(1, 2, 3, 2)),
        ("adaptive_avg_pool", lambda x: adaptive_avg_pool(x, 3), [t(1, 2, 7, 6)], w(1, 2, 3, 3)),
        ("softmax_channels", softmax_channels, [t(2, 3, 2, 2)], w(2, 3, 2, 2)),
        ("add", add, [t(2, 3), t(2, 3)], None),
        ("concat_channels", lambda a, b: concat_channels([a, b]), [t(1, 2, 3, 3), t(1, 1, 3, 3)], w(1, 3, 3, 3)),
        ("scale_channels", scale_channels, [t(2, 4, 3, 3), t(4)], w(2, 4, 3, 3)),
        ("select_channels", lambda x: select_channels(x, 1, 3), [t(1, 4, 2, 2)], None),
    ]


def _module_cases(rng):
    def t(*shape):
        return Tensor(rng.standard_normal(shape), requires_grad=True)

    def mod(m):
        return _jitter(m, rng)

    stem = mod(Stem(stream(1, "suite/stem"), 4))
    block = mod(ConvNeXtBlock(stream(1, "suite/block"), 4))
    plain = mod(PlainBlock(stream(1, "suite/plain"), 3))
    down = mod(Downsample(stream(1, "suite/down"), 4))
    ppm = mod(PPM(stream(1, "suite/ppm"), 4, 4, (1, 2)))
    lat = mod(Lateral(stream(1, "suite/lateral"), 4, 3))
    head = mod(FuseHead(stream(1, "suite/head"), 3, 2))
    masks = (rng.random((2, 8, 8)) < 0.3).astype(np.float64)
    return [
        ("stem", lambda x, *ps: stem(x), [t(1, 3, 32, 32)] + stem.parameters(), rng.standard_normal((1, 4, 8, 8)), 40),
        ("convnext_block", lambda x, *ps: block(x), [t(1, 4, 6, 6)] + block.parameters(),
         rng.standard_normal((1, 4, 6, 6)), 40),
        ("plain_block", lambda x, *ps: plain(x), [t(1, 3, 5, 5)] + plain.parameters(),
         rng.standard_normal((1, 3, 5, 5)), 40),
        ("downsample", lambda x, *ps: down(x), [t(1, 4, 6, 6)] + down.parameters(),
         rng.standard_normal((1, 8, 3, 3)), None),
        ("ppm", lambda x, *ps: ppm(x), [t(1, 4, 4, 4)] + ppm.parameters(), rng.standard_normal((1, 4, 4, 4)), 30),
        ("lateral", lambda y, x, *ps: lat(y, x), [t(1, 3, 2, 2), t(1, 4, 4, 4)] + lat.parameters(),
         rng.standard_normal((1, 3, 4, 4)), 30),
        ("fuse_head", lambda a, b, *ps: head([a, b], 8, 8).probs, [t(1, 3, 2, 2), t(1, 3, 4, 4)] + head.parameters(),
         rng.standard_normal((1, 1, 8, 8)), 30),
        ("logits_loss/combined", lambda z: logits_loss(z, masks, LossConfig()), [t(2, 2, 8, 8)], None, None),
        ("logits_loss/ce", lambda z: logits_loss(z, masks, LossConfig(kind="ce")), [t(2, 2, 8, 8)], None, None),
    ]


def desk_network_problem(seed=0):
    """A jittered desk network, one 64x64 image and a mask; returns (net, loss thunk)."""
    rng = np.random.default_rng(seed)
    net = TamperLocNet(EncoderConfig.desk(), DecoderConfig.desk(), seed=seed)
    _jitter(net, rng, scale=0.05)
    x = preprocess(rng.integers(0, 256, (1, 64, 64, 3), dtype=np.uint8))
    masks = np.zeros((1, 64, 64))
    masks[0, 20:44, 12:36] = 1
    return net, lambda: logits_loss(net(x).logits, masks)


def run_suite(seed=0):
    """Run every case; returns a list of CaseResult."""
    rng = np.random.default_rng(seed)
    results = []

    def timed(name, tol, thunk):
        start = time.perf_counter()
        err = thunk()
        results.append(CaseResult(name, err, tol, time.perf_counter() - start))

    for name, op, inputs, weights in _op_cases(rng):
        timed(name, OP_TOL, lambda: grad_check(op, inputs, h=H, weights=weights, name=name).max_error)
    for name, op, inputs, weights, coords in _module_cases(rng):
        timed(name, OP_TOL,
              lambda: grad_check(op, inputs, h=H, weights=weights, max_coords=coords, name=name).max_error)

    net, loss = desk_network_problem(seed)
    params = net.parameters()
    timed("network/directional", NETWORK_TOL, lambda: directional_check(loss, params, h=H, n_dirs=3, seed=seed))
    timed("network/coordinates", NETWORK_TOL,
          lambda: grad_check(lambda *ps: loss(), params, h=H, tol=NETWORK_TOL, max_coords=2, seed=seed).max_error)
    return results
