"""Single-lane ring road: one controlled vehicle among car-following humans.

21 simulated human drivers follow the Intelligent Driver Model with additive
acceleration noise; the ego vehicle applies a commanded acceleration. Reward
tracks how close the fleet's mean speed is to a target speed; any collision
ends the episode.
"""

from __future__ import annotations

import math

import numpy as np

from ..kernels import ring_step
from .base import Env, EnvSpec

N_VEHICLES = 22
RING_LENGTH = 260.0
VEH_LEN = 5.0
TARGET_SPEED = 4.5
HORIZON = 750
DT = 0.1
EGO_ACCEL_MAX = 1.0
NOISE_STD = 0.2
VEL_SCALE = 10.0

IDM_PARAMS = {
    "v0": 5.0,
    "T": 1.0,
    "s0": 2.0,
    "a_max": 1.0,
    "b_comf": 1.5,
    "b_max": 3.0,
}


def speed_reward(mean_speed: float) -> float:
    """1 at the target speed, decaying linearly to 0, never negative."""
    return max(0.0, 1.0 - abs(mean_speed - TARGET_SPEED) / TARGET_SPEED)


def idm_accel(gap, speed, lead_speed, params=None, rng=None, noise_std=0.0):
    """Car-following acceleration for one vehicle.

    a = a_max (1 - (v/v0)^4 - (s*/gap)^2),  s* = s0 + vT + v dv/(2 sqrt(a_max b_comf))
    plus optional zero-mean Gaussian noise, clamped to [-b_max, a_max].
    """
    p = dict(IDM_PARAMS)
    if params:
        p.update(params)
    if gap <= 0.0:
        raise ValueError("gap must be positive (collision)")
    dv = speed - lead_speed
    s_star = p["s0"] + speed * p["T"] + speed * dv / (2.0 * math.sqrt(p["a_max"] * p["b_comf"]))
    accel = p["a_max"] * (1.0 - (speed / p["v0"]) ** 4 - (s_star / gap) ** 2)
    if rng is not None and noise_std > 0.0:
        accel += rng.normal(0.0, noise_std)
    return float(np.clip(accel, -p["b_max"], p["a_max"]))


class RingEnv(Env):
    def __init__(self, noise_std: float = NOISE_STD):
        super().__init__()
        names = [f"pos_{i}" if i else "pos_ego" for i in range(N_VEHICLES)]
        names += [f"vel_{i}" if i else "vel_ego" for i in range(N_VEHICLES)]
        self.spec = EnvSpec(
            name="ring",
            obs_dim=2 * N_VEHICLES,
            action_dim=1,
            action_low=[-EGO_ACCEL_MAX],
            action_high=[EGO_ACCEL_MAX],
            horizon=HORIZON,
            feature_names=names,
            normalization={"pos_scale": RING_LENGTH, "vel_scale": VEL_SCALE},
        )
        self.noise_std = noise_std
        self.params = dict(IDM_PARAMS, length=RING_LENGTH, veh_len=VEH_LEN, dt=DT)
        self.pos = None
        self.vel = None
        self.crashed = False

    def _reset(self):
        spacing = RING_LENGTH / N_VEHICLES
        self.pos = np.arange(N_VEHICLES) * spacing
        self.vel = np.zeros(N_VEHICLES)
        self.crashed = False
        return self._obs()

    def _obs(self):
        return np.concatenate(
            [self.pos / RING_LENGTH, np.clip(self.vel / VEL_SCALE, -1.0, 1.0)]
        )

    def _step(self, action):
        noise = self._rng.normal(0.0, self.noise_std, size=N_VEHICLES)
        noise[0] = 0.0
        self.pos, self.vel, min_gap = ring_step(
            self.pos, self.vel, float(action[0]), noise, self.params
        )
        self.crashed = min_gap <= 0.0
        return self._obs(), speed_reward(float(self.vel.mean())), self.crashed

    @property
    def mean_speed(self) -> float:
        return float(self.vel.mean())
