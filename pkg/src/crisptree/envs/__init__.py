"""Built-in environments, selectable by name."""

from __future__ import annotations

import numpy as np

from .base import Env, EnvSpec
from .cartpole import CartPoleEnv
from .lane import LaneEnv
from .ring import RingEnv, idm_accel
from .synthetic import PlateauEnv

_REGISTRY = {
    "pendulum": CartPoleEnv,
    "lane": LaneEnv,
    "ring": RingEnv,
    "plateau4": PlateauEnv,
}

ENV_NAMES = tuple(_REGISTRY)


def make_env(name: str, **kwargs) -> Env:
    try:
        cls = _REGISTRY[name]
    except KeyError:
        raise ValueError(f"env: unknown {name!r}") from None
    return cls(**kwargs)


def no_op_policy(env: Env):
    """Zero-action policy used as an evaluation control."""
    zeros = np.zeros(env.spec.action_dim)

    def act(obs):
        return zeros

    return act


__all__ = [
    "Env",
    "EnvSpec",
    "CartPoleEnv",
    "LaneEnv",
    "RingEnv",
    "PlateauEnv",
    "idm_accel",
    "make_env",
    "no_op_policy",
    "ENV_NAMES",
]
