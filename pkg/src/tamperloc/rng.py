"""Counter-based random streams.

A stream is fully determined by ``(seed, counter)``. Child streams are keyed
by hashing the parent seed with a text label, so the draws of sample 17 never
depend on how many draws sample 16 made or which worker produced it.
"""
from __future__ import annotations

import hashlib

import numpy as np

MASK64 = (1 << 64) - 1


def derive_seed(master, label):
    digest = hashlib.blake2b(f"{int(master) & MASK64}:{label}".encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little")


class RngStream:
    """Philox-backed generator addressed by (seed, counter)."""

    def __init__(self, seed, counter=0):
        self.seed = int(seed) & MASK64
        self.counter = int(counter) & MASK64
        bitgen = np.random.Philox(key=self.seed, counter=self.counter)
        self.gen = np.random.Generator(bitgen)

    def child(self, label):
        return RngStream(derive_seed(self.seed, label))

    def __repr__(self):
        return f"RngStream(seed={self.seed:#018x}, counter={self.counter})"

    # thin pass-throughs keep call sites short
    def uniform(self, low=0.0, high=1.0, size=None):
        return self.gen.uniform(low, high, size)

    def integers(self, low, high=None, size=None):
        return self.gen.integers(low, high, size)

    def normal(self, loc=0.0, scale=1.0, size=None):
        return self.gen.normal(loc, scale, size)

    def random(self, size=None):
        return self.gen.random(size)

    def permutation(self, n):
        return self.gen.permutation(n)


def stream(master, label):
    return RngStream(derive_seed(master, label))
