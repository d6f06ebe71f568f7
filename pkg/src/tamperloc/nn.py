"""Parameter containers shared by the encoder and decoder."""
from __future__ import annotations

import numpy as np

from .core import ConvParams, Tensor, conv2d, gelu, layer_norm


def trunc_normal(rng, shape, std=0.02, bound=2.0):
    """Normal(0, std) truncated to +-bound*std by resampling."""
    out = rng.normal(0.0, 1.0, size=shape)
    bad = np.abs(out) > bound
    while bad.any():
        out[bad] = rng.normal(0.0, 1.0, size=int(bad.sum()))
        bad = np.abs(out) > bound
    return out * std


class Module:
    """Ordered tree of named parameters.

    Registration order fixes parameter order, which in turn fixes checkpoint
    layout and optimizer iteration order.
    """

    def __init__(self):
        self._params = {}
        self._children = {}

    def add_param(self, name, value):
        t = Tensor(value, requires_grad=True, name=name)
        self._params[name] = t
        return t

    def add_child(self, name, module):
        self._children[name] = module
        return module

    def named_parameters(self, prefix=""):
        for name, t in self._params.items():
            yield prefix + name, t
        for name, child in self._children.items():
            yield from child.named_parameters(f"{prefix}{name}.")

    def parameters(self):
        return [t for _, t in self.named_parameters()]

    def zero_grad(self):
        for t in self.parameters():
            t.zero_grad()

    def num_parameters(self):
        return sum(t.data.size for t in self.parameters())


class Conv(Module):
    def __init__(self, rng, c_in, c_out, k, stride=1, padding=0, groups=1, std=0.02, he=False):
        super().__init__()
        shape = (c_out, c_in // groups, k, k)
        if he:
            # fan-in scaling keeps activations O(1) through stacks without normalization
            std = np.sqrt(2.0 / (shape[1] * k * k))
            w = rng.normal(0.0, std, size=shape)
        else:
            w = trunc_normal(rng, shape, std)
        self.weight = self.add_param("weight", w)
        self.bias = self.add_param("bias", np.zeros(c_out))
        self.stride, self.padding, self.groups = stride, padding, groups

    @property
    def params(self):
        return ConvParams(self.weight, self.bias, self.stride, self.padding, self.groups)

    def __call__(self, x):
        return conv2d(x, self.params)


class ConvAct(Conv):
    """Convolution followed by GELU."""

    def __call__(self, x):
        return gelu(conv2d(x, self.params))


class LayerNorm(Module):
    def __init__(self, c, eps=1e-6):
        super().__init__()
        self.gamma = self.add_param("gamma", np.ones(c))
        self.beta = self.add_param("beta", np.zeros(c))
        self.eps = eps

    def __call__(self, x):
        return layer_norm(x, self.gamma, self.beta, self.eps)
