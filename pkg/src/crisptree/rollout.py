"""Episode rollout and evaluation helpers."""

from __future__ import annotations

import numpy as np


def run_episode(env, act_fn, seed: int):
    """Play one episode; act_fn maps an observation to an action array.

    Returns (total_return, steps).
    """
    obs = env.reset(seed)
    total, steps = 0.0, 0
    done = False
    while not done:
        obs, reward, done = env.step(act_fn(obs))
        total += reward
        steps += 1
    return total, steps


def evaluate(env, act_fn, episodes: int, seed: int) -> np.ndarray:
    """Returns of ``episodes`` consecutive seeded episodes."""
    return np.array([run_episode(env, act_fn, seed + i)[0] for i in range(episodes)])


def policy_fn(model, rng=None):
    """Deterministic action function of a trained model."""

    def act(obs):
        return model.act(obs, training=False, rng=rng).action_array()

    return act


def crisp_fn(tree):
    """Action function of an exported crisp tree."""
    from .tree import crisp_predict

    def act(obs):
        return crisp_predict(tree, obs)

    return act


def mean_stderr(returns) -> tuple[float, float]:
    r = np.asarray(returns, dtype=np.float64)
    if r.size <= 1:
        return float(r.mean()) if r.size else 0.0, 0.0
    return float(r.mean()), float(r.std(ddof=1) / np.sqrt(r.size))
