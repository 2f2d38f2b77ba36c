"""Shared environment interface: episodic, seeded, normalized observations."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class EnvSpec:
    """Static description of an environment's interface."""

    name: str
    obs_dim: int
    action_dim: int
    action_low: np.ndarray
    action_high: np.ndarray
    horizon: int
    feature_names: list
    normalization: dict = field(default_factory=dict)

    def __post_init__(self):
        self.action_low = np.asarray(self.action_low, dtype=np.float64).reshape(-1)
        self.action_high = np.asarray(self.action_high, dtype=np.float64).reshape(-1)
        if self.horizon <= 0:
            raise ValueError("horizon must be positive")
        if not (np.all(np.isfinite(self.action_low)) and np.all(np.isfinite(self.action_high))):
            raise ValueError("action bounds must be finite")
        if len(self.feature_names) != self.obs_dim:
            raise ValueError("need one feature name per observation dimension")


class Env:
    """Base episodic environment. Subclasses fill in _reset/_step."""

    spec: EnvSpec

    def __init__(self):
        self._rng = None
        self._t = 0

    def reset(self, seed: int) -> np.ndarray:
        self._rng = np.random.default_rng(seed)
        self._t = 0
        return self._reset()

    def step(self, action):
        if self._rng is None:
            raise RuntimeError("call reset() before step()")
        action = np.asarray(action, dtype=np.float64).reshape(-1)
        if action.shape != (self.spec.action_dim,):
            raise ValueError(
                f"expected action of shape ({self.spec.action_dim},), got {action.shape}"
            )
        if np.any(np.isnan(action)):
            raise ValueError("action contains NaN")
        low, high = self.spec.action_low, self.spec.action_high
        if np.any(action < low) or np.any(action > high):
            import warnings

            warnings.warn(f"action {action} outside bounds; clipping", stacklevel=2)
            action = np.clip(action, low, high)
        self._t += 1
        obs, reward, done = self._step(action)
        if self._t >= self.spec.horizon:
            done = True
        return obs, float(reward), bool(done)

    def _reset(self) -> np.ndarray:
        raise NotImplementedError

    def _step(self, action):
        raise NotImplementedError
