"""Lane keeping: steer a constant-speed kinematic bicycle along a winding lane.

The reference path is a sinusoid; reward falls off quadratically with the
lateral offset from the lane center and the episode ends if the vehicle
leaves the lane.
"""

from __future__ import annotations

import math

import numpy as np

from .base import Env, EnvSpec

WHEELBASE = 2.5
SPEED = 10.0
DT = 0.05
STEER_MAX = 0.3
HORIZON = 500
AMPLITUDE = 2.0
WAVELENGTH = 100.0
WAVE_K = 2.0 * math.pi / WAVELENGTH
OFFSET_SCALE = 1.0  # reward length scale (m)
DEPART_LIMIT = 2.0  # lane departure (m)
LOOKAHEAD = np.array([0.0, 5.0, 10.0, 15.0, 20.0, 25.0])

X_SCALE = SPEED * DT * HORIZON
CURV_SCALE = AMPLITUDE * WAVE_K * WAVE_K


def path_y(x):
    return AMPLITUDE * np.sin(WAVE_K * x)


def path_heading(x):
    return np.arctan(AMPLITUDE * WAVE_K * np.cos(WAVE_K * x))


def path_curvature(x):
    slope = AMPLITUDE * WAVE_K * np.cos(WAVE_K * x)
    second = -AMPLITUDE * WAVE_K * WAVE_K * np.sin(WAVE_K * x)
    return second / (1.0 + slope * slope) ** 1.5


class LaneEnv(Env):
    def __init__(self):
        super().__init__()
        names = ["x", "y", "heading", "speed", "lat_offset", "heading_err"] + [
            f"curv_{int(d)}m" for d in LOOKAHEAD
        ]
        self.spec = EnvSpec(
            name="lane",
            obs_dim=12,
            action_dim=1,
            action_low=[-STEER_MAX],
            action_high=[STEER_MAX],
            horizon=HORIZON,
            feature_names=names,
            normalization={
                "x_scale": X_SCALE,
                "y_scale": 5.0,
                "offset_scale": DEPART_LIMIT,
                "curv_scale": CURV_SCALE,
                "speed_scale": SPEED,
            },
        )
        self.state = None  # (x, y, heading)

    def _reset(self):
        x = 0.0
        y = float(path_y(x)) + self._rng.uniform(-0.1, 0.1)
        heading = float(path_heading(x)) + self._rng.uniform(-0.05, 0.05)
        self.state = np.array([x, y, heading])
        return self._obs()

    def _offset(self):
        x, y, _ = self.state
        return y - float(path_y(x))

    def _obs(self):
        x, y, heading = self.state
        ey = self._offset()
        e_psi = heading - float(path_heading(x))
        curv = path_curvature(x + LOOKAHEAD)
        core = np.array(
            [x / X_SCALE, y / 5.0, heading, SPEED / SPEED, ey / DEPART_LIMIT, e_psi]
        )
        return np.concatenate([core, curv / CURV_SCALE])

    def _step(self, action):
        x, y, heading = self.state
        steer = float(action[0])
        heading = heading + SPEED / WHEELBASE * math.tan(steer) * DT
        x = x + SPEED * math.cos(heading) * DT
        y = y + SPEED * math.sin(heading) * DT
        self.state = np.array([x, y, heading])
        ey = self._offset()
        reward = max(0.0, 1.0 - (ey / OFFSET_SCALE) ** 2)
        done = abs(ey) > DEPART_LIMIT
        return self._obs(), reward, done
