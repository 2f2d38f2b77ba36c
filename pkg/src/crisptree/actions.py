"""Bounded-action head: tanh squashing of Gaussian outputs with the
change-of-variables log-probability correction.

All actors (tree policies, soft-tree baselines, MLPs) share this head so
that training and evaluation treat action bounds identically. Per-dimension
quantities are kept as separate Values; batched calls use (B,) vectors and
single-state calls use scalars.
"""

from __future__ import annotations

import math

import numpy as np

from . import autodiff as ad

_LOG2 = math.log(2.0)


class ActionBounds:
    """Closed interval per action dimension."""

    def __init__(self, low, high):
        self.low = np.asarray(low, dtype=np.float64).reshape(-1)
        self.high = np.asarray(high, dtype=np.float64).reshape(-1)
        if self.low.shape != self.high.shape or np.any(self.low >= self.high):
            raise ValueError(f"bad action bounds: {self.low} .. {self.high}")
        self.center = (self.high + self.low) / 2.0
        self.half = (self.high - self.low) / 2.0

    @property
    def dim(self) -> int:
        return self.low.size

    def as_dict(self):
        return {"low": self.low.tolist(), "high": self.high.tolist()}


def squash(raw: ad.Value, bounds: ActionBounds, dim: int) -> ad.Value:
    """center + half * tanh(raw) for one action dimension."""
    return ad.add(ad.scale(ad.tanh(raw), bounds.half[dim]), bounds.center[dim])


def squash_np(raw: np.ndarray, bounds: ActionBounds) -> np.ndarray:
    """Vectorized squash over all dims at once (no gradients)."""
    return bounds.center + bounds.half * np.tanh(raw)


def _tanh_log_jacobian(raw: ad.Value) -> ad.Value:
    # log(1 - tanh(u)^2) = 2*(log 2 - u - softplus(-2u)), stable for large |u|
    sp = ad.softplus(ad.scale(raw, -2.0))
    return ad.scale(ad.add(ad.sub(_LOG2, raw), ad.scale(sp, -1.0)), 2.0)


def log_prob(raw_dims, mean_dims, std_dims, bounds: ActionBounds) -> ad.Value:
    """log pi of the squashed action whose pre-squash value is ``raw``.

    Sums over action dimensions: Gaussian log-density of raw minus the
    log-determinant of the squash map (tanh jacobian and interval scaling).
    """
    total = None
    for d, (raw, mean, std) in enumerate(zip(raw_dims, mean_dims, std_dims)):
        lp = ad.gaussian_log_density(raw, mean, std)
        lp = ad.sub(lp, _tanh_log_jacobian(raw))
        lp = ad.sub(lp, math.log(bounds.half[d]))
        total = lp if total is None else ad.add(total, lp)
    return total


def sample(mean_dims, std_dims, bounds: ActionBounds, noise_dims):
    """Reparameterized squashed-Gaussian sample.

    Returns (action_dims, raw_dims, log_prob). ``noise_dims`` are plain
    standard-normal arrays, one per action dimension.
    """
    raw_dims = []
    for mean, std, eps in zip(mean_dims, std_dims, noise_dims):
        raw_dims.append(ad.add(mean, ad.mul(std, ad.const(eps))))
    action_dims = [squash(r, bounds, d) for d, r in enumerate(raw_dims)]
    lp = log_prob(raw_dims, mean_dims, std_dims, bounds)
    return action_dims, raw_dims, lp


def deterministic(mean_dims, std_dims, bounds: ActionBounds):
    """Squashed mean plus its log-probability under the policy."""
    action_dims = [squash(m, bounds, d) for d, m in enumerate(mean_dims)]
    lp = log_prob(mean_dims, mean_dims, std_dims, bounds)
    return action_dims, lp
