"""Synthetic one-dimensional task whose optimal action is piecewise constant.

The optimal policy takes one of four action plateaus depending on where the
scalar state falls in [-1, 1]; states are drawn i.i.d. each step. A two-leaf
tree provably cannot fit all four plateaus, which makes this the canonical
check for the dynamic deepening loop.
"""

from __future__ import annotations

import numpy as np

from .base import Env, EnvSpec

PLATEAU_EDGES = [-0.5, 0.0, 0.5]
PLATEAU_VALUES = [-0.75, -0.25, 0.25, 0.75]
HORIZON = 50


def optimal_action(s: float) -> float:
    for edge, val in zip(PLATEAU_EDGES, PLATEAU_VALUES):
        if s < edge:
            return val
    return PLATEAU_VALUES[-1]


class PlateauEnv(Env):
    def __init__(self):
        super().__init__()
        self.spec = EnvSpec(
            name="plateau4",
            obs_dim=1,
            action_dim=1,
            action_low=[-1.0],
            action_high=[1.0],
            horizon=HORIZON,
            feature_names=["s"],
        )
        self.s = 0.0

    def _reset(self):
        self.s = float(self._rng.uniform(-1.0, 1.0))
        return np.array([self.s])

    def _step(self, action):
        err = float(action[0]) - optimal_action(self.s)
        reward = -err * err
        self.s = float(self._rng.uniform(-1.0, 1.0))
        return np.array([self.s]), reward, False
