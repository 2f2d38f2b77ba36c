# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled kernels: batch crisp-tree inference and the ring-road tick."""

import numpy as np

cimport numpy as cnp
from libc.math cimport fmod, sqrt, tanh

cnp.import_array()


cdef inline double _wrap_mod(double x, double length) nogil:
    cdef double r = fmod(x, length)
    if r < 0.0:
        r += length
    return r


def tree_predict(flat, X):
    cdef cnp.ndarray[cnp.float64_t, ndim=2] Xa = np.ascontiguousarray(X, dtype=np.float64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] feature = flat["feature"]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] threshold = flat["threshold"]
    cdef cnp.ndarray[cnp.int64_t, ndim=1] greater = flat["greater"]
    cdef cnp.ndarray[cnp.float64_t, ndim=3] coefs = np.ascontiguousarray(flat["coefs"])
    cdef cnp.ndarray[cnp.float64_t, ndim=2] bias = np.ascontiguousarray(flat["bias"])
    cdef cnp.ndarray[cnp.float64_t, ndim=1] center = flat["center"]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] half = flat["half"]
    cdef Py_ssize_t n_nodes = flat["n_nodes"]
    cdef Py_ssize_t B = Xa.shape[0]
    cdef Py_ssize_t m = Xa.shape[1]
    cdef Py_ssize_t adim = bias.shape[1]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out = np.empty((B, adim))
    cdef Py_ssize_t b, i, leaf, d, j
    cdef double v, s
    cdef bint cond
    for b in range(B):
        i = 0
        while i < n_nodes:
            v = Xa[b, feature[i]]
            if greater[i] == 1:
                cond = v > threshold[i]
            else:
                cond = v < threshold[i]
            i = 2 * i + 1 if cond else 2 * i + 2
        leaf = i - n_nodes
        for d in range(adim):
            s = 0.0
            for j in range(m):
                s += coefs[leaf, d, j] * Xa[b, j]
            s += bias[leaf, d]
            out[b, d] = center[d] + half[d] * tanh(s)
    return out


def ring_step(pos, vel, double ego_accel, noise, p):
    cdef cnp.ndarray[cnp.float64_t, ndim=1] pa = np.ascontiguousarray(pos)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] va = np.ascontiguousarray(vel)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] na = np.ascontiguousarray(noise)
    cdef double length = p["length"]
    cdef double veh_len = p["veh_len"]
    cdef double s0 = p["s0"]
    cdef double T = p["T"]
    cdef double a_max = p["a_max"]
    cdef double b_comf = p["b_comf"]
    cdef double b_max = p["b_max"]
    cdef double v0 = p["v0"]
    cdef double dt = p["dt"]
    cdef Py_ssize_t n = pa.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] new_pos = np.empty(n)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] new_vel = np.empty(n)
    cdef Py_ssize_t i, lead
    cdef double gap, dv, s_star, acc, ratio, min_gap, denom
    denom = 2.0 * sqrt(a_max * b_comf)
    for i in range(n):
        if i == 0:
            acc = ego_accel
        else:
            lead = i + 1 if i + 1 < n else 0
            gap = _wrap_mod(pa[lead] - pa[i], length) - veh_len
            dv = va[i] - va[lead]
            s_star = s0 + va[i] * T + va[i] * dv / denom
            ratio = va[i] / v0
            acc = a_max * (1.0 - ratio * ratio * ratio * ratio - (s_star / gap) * (s_star / gap))
            acc = acc + na[i]
            if acc < -b_max:
                acc = -b_max
            elif acc > a_max:
                acc = a_max
        new_vel[i] = va[i] + acc * dt
        if new_vel[i] < 0.0:
            new_vel[i] = 0.0
        new_pos[i] = _wrap_mod(pa[i] + new_vel[i] * dt, length)
    min_gap = length
    for i in range(n):
        lead = i + 1 if i + 1 < n else 0
        gap = _wrap_mod(new_pos[lead] - new_pos[i], length) - veh_len
        if gap < min_gap:
            min_gap = gap
    return new_pos, new_vel, min_gap
