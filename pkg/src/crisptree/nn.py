"""Small fully-connected building blocks on top of the autodiff Values."""

from __future__ import annotations

import math

import numpy as np

from . import autodiff as ad


class Linear:
    def __init__(self, in_dim: int, out_dim: int, rng: np.random.Generator):
        lim = 1.0 / math.sqrt(in_dim)
        self.W = ad.param(rng.uniform(-lim, lim, size=(in_dim, out_dim)))
        self.b = ad.param(rng.uniform(-lim, lim, size=out_dim))

    def __call__(self, x: ad.Value) -> ad.Value:
        return ad.add(ad.matmul(x, self.W), self.b)

    def parameters(self):
        return [self.W, self.b]


class Head:
    """Linear map to a single output, evaluated as a (B,) vector."""

    def __init__(self, in_dim: int, rng: np.random.Generator):
        lim = 1.0 / math.sqrt(in_dim)
        self.w = ad.param(rng.uniform(-lim, lim, size=in_dim))
        self.b = ad.param(rng.uniform(-lim, lim))

    def __call__(self, x: ad.Value) -> ad.Value:
        return ad.add(ad.matmul(x, self.w), self.b)

    def parameters(self):
        return [self.w, self.b]


class Mlp:
    """ReLU trunk followed by one scalar head: (B, in) -> (B,)."""

    def __init__(self, in_dim: int, hidden: list, rng: np.random.Generator):
        self.layers = []
        d = in_dim
        for h in hidden:
            self.layers.append(Linear(d, h, rng))
            d = h
        self.head = Head(d, rng)

    def trunk(self, x: ad.Value) -> ad.Value:
        for layer in self.layers:
            x = ad.relu(layer(x))
        return x

    def __call__(self, x: ad.Value) -> ad.Value:
        return self.head(self.trunk(x))

    def parameters(self):
        out = []
        for layer in self.layers:
            out.extend(layer.parameters())
        out.extend(self.head.parameters())
        return out

    def copy_from(self, other: "Mlp"):
        for mine, theirs in zip(self.parameters(), other.parameters()):
            mine.data = theirs.data.copy()

    def count_params(self) -> int:
        return sum(p.data.size for p in self.parameters())
