"""Pure-NumPy reference implementations of the compiled kernels."""

import numpy as np


def tree_predict(flat, X):
    X = np.asarray(X, dtype=np.float64)
    B = X.shape[0]
    n_nodes = flat["n_nodes"]
    feature, threshold, greater = flat["feature"], flat["threshold"], flat["greater"]
    coefs, bias = flat["coefs"], flat["bias"]
    center, half = flat["center"], flat["half"]
    adim = bias.shape[1]

    ptr = np.zeros(B, dtype=np.int64)
    for _ in range(flat["depth"]):
        v = X[np.arange(B), feature[ptr]]
        t = threshold[ptr]
        cond = np.where(greater[ptr] == 1, v > t, v < t)
        ptr = np.where(cond, 2 * ptr + 1, 2 * ptr + 2)
    leaf = ptr - n_nodes

    out = np.empty((B, adim))
    for d in range(adim):
        raw = np.einsum("bj,bj->b", X, coefs[leaf, d, :]) + bias[leaf, d]
        out[:, d] = center[d] + half[d] * np.tanh(raw)
    return out


def ring_step(pos, vel, ego_accel, noise, p):
    """Advance every vehicle one tick; vehicle 0 is the ego.

    Humans follow the car-following law
        a = a_max * (1 - (v/v0)^4 - (s*/gap)^2),
        s* = s0 + v*T + v*dv / (2*sqrt(a_max*b_comf)),
    plus the supplied per-vehicle noise, clamped to [-b_max, a_max]. The ego
    applies ``ego_accel`` directly. Speeds stay nonnegative; positions use
    the updated speed (semi-implicit Euler) and wrap modulo the ring length.
    """
    n = pos.shape[0]
    lead = np.roll(pos, -1)
    gap = np.mod(lead - pos, p["length"]) - p["veh_len"]
    dv = vel - np.roll(vel, -1)

    with np.errstate(divide="ignore", invalid="ignore"):
        s_star = p["s0"] + vel * p["T"] + vel * dv / (2.0 * np.sqrt(p["a_max"] * p["b_comf"]))
        accel = p["a_max"] * (1.0 - (vel / p["v0"]) ** 4 - (s_star / gap) ** 2)
    accel = accel + noise
    accel = np.clip(accel, -p["b_max"], p["a_max"])
    accel[0] = ego_accel

    new_vel = np.maximum(vel + accel * p["dt"], 0.0)
    new_pos = np.mod(pos + new_vel * p["dt"], p["length"])
    new_gap = np.mod(np.roll(new_pos, -1) - new_pos, p["length"]) - p["veh_len"]
    return new_pos, new_vel, float(new_gap.min())
