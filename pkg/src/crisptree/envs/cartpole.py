"""Cart-pole balancing with a continuous force action.

Classic cart-and-uniform-rod dynamics integrated with semi-implicit Euler.
Reward is +1 per step while the pole stays within the angle and track
limits; an episode that never terminates earns the full horizon.
"""

from __future__ import annotations

import math

import numpy as np

from .base import Env, EnvSpec

CART_MASS = 1.0
POLE_MASS = 0.1
HALF_LEN = 0.5  # pole half-length (m)
GRAVITY = 9.81
DT = 0.02
FORCE_MAX = 3.0
ANGLE_LIMIT = 0.2  # rad
POS_LIMIT = 2.4  # m
HORIZON = 1000

OBS_SCALE = np.array([POS_LIMIT, 3.0, ANGLE_LIMIT, 3.0])


class CartPoleEnv(Env):
    def __init__(self):
        super().__init__()
        self.spec = EnvSpec(
            name="pendulum",
            obs_dim=4,
            action_dim=1,
            action_low=[-FORCE_MAX],
            action_high=[FORCE_MAX],
            horizon=HORIZON,
            feature_names=["cart_pos", "cart_vel", "pole_angle", "pole_ang_vel"],
            normalization={"obs_scale": OBS_SCALE.tolist()},
        )
        self.state = None  # (x, x_dot, theta, theta_dot)

    def _reset(self):
        self.state = self._rng.uniform(-0.05, 0.05, size=4)
        return self._obs()

    def _obs(self):
        return self.state / OBS_SCALE

    def _step(self, action):
        self.state = integrate(self.state, float(action[0]), DT)
        x, _, theta, _ = self.state
        done = abs(theta) > ANGLE_LIMIT or abs(x) > POS_LIMIT
        return self._obs(), 1.0, done


def integrate(state, force, dt):
    """One semi-implicit Euler tick of the cart-pole equations of motion."""
    x, x_dot, theta, theta_dot = state
    total = CART_MASS + POLE_MASS
    sin_t, cos_t = math.sin(theta), math.cos(theta)
    temp = (force + POLE_MASS * HALF_LEN * theta_dot * theta_dot * sin_t) / total
    theta_acc = (GRAVITY * sin_t - cos_t * temp) / (
        HALF_LEN * (4.0 / 3.0 - POLE_MASS * cos_t * cos_t / total)
    )
    x_acc = temp - POLE_MASS * HALF_LEN * theta_acc * cos_t / total
    x_dot = x_dot + x_acc * dt
    x = x + x_dot * dt
    theta_dot = theta_dot + theta_acc * dt
    theta = theta + theta_dot * dt
    return np.array([x, x_dot, theta, theta_dot])


def total_energy(state) -> float:
    """Kinetic plus potential energy (zero potential at horizontal pole)."""
    _, x_dot, theta, theta_dot = state
    v_cm_sq = (
        x_dot * x_dot
        + 2.0 * x_dot * HALF_LEN * theta_dot * math.cos(theta)
        + HALF_LEN * HALF_LEN * theta_dot * theta_dot
    )
    inertia_cm = POLE_MASS * (2 * HALF_LEN) ** 2 / 12.0
    kinetic = (
        0.5 * CART_MASS * x_dot * x_dot
        + 0.5 * POLE_MASS * v_cm_sq
        + 0.5 * inertia_cm * theta_dot * theta_dot
    )
    potential = POLE_MASS * GRAVITY * HALF_LEN * math.cos(theta)
    return kinetic + potential
