#!/usr/bin/env python3
"""Benchmark the compiled kernels against the pure-NumPy fallback.

Run: python benchmarks/bench_kernels.py
"""

import time

import numpy as np

from crisptree.kernels import (
    USING_COMPILED,
    reference_ring_step,
    reference_tree_predict,
    ring_step,
    tree_predict,
)
from crisptree.tree import TreePolicy


def timeit(fn, repeats=5):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_tree_predict():
    rng = np.random.default_rng(0)
    rows = []
    for depth, m in ((2, 4), (4, 8), (5, 44)):
        tp = TreePolicy(depth=depth, m=m, action_dim=1, e=min(2, m), seed=0)
        for node in tp.nodes:
            node.w.data[:] = rng.normal(size=m)
        flat = tp.to_crisp().flat()
        X = rng.normal(size=(100_000, m))
        t_fast = timeit(lambda: tree_predict(flat, X))
        t_ref = timeit(lambda: reference_tree_predict(flat, X))
        rows.append(("tree_predict", f"depth={depth} m={m}", t_fast, t_ref))
    return rows


def bench_ring_step():
    rng = np.random.default_rng(1)
    p = {"length": 260.0, "veh_len": 5.0, "s0": 2.0, "T": 1.0, "a_max": 1.0,
         "b_comf": 1.5, "b_max": 3.0, "v0": 5.0, "dt": 0.1}
    pos = np.sort(rng.uniform(0, 260, size=22))
    vel = rng.uniform(0, 5, size=22)
    noise = rng.normal(0, 0.2, size=(5000, 22))

    def run(step):
        p_, v_ = pos.copy(), vel.copy()
        for i in range(5000):
            p_, v_, _ = step(p_, v_, 0.1, noise[i], p)

    t_fast = timeit(lambda: run(ring_step), repeats=3)
    t_ref = timeit(lambda: run(reference_ring_step), repeats=3)
    return [("ring_step", "22 vehicles x 5000 ticks", t_fast, t_ref)]


def main():
    print(f"compiled extension in use: {USING_COMPILED}")
    rows = bench_tree_predict() + bench_ring_step()
    print(f"{'kernel':<14} {'case':<26} {'compiled':>10} {'fallback':>10} {'speedup':>8}")
    for kernel, case, t_fast, t_ref in rows:
        print(f"{kernel:<14} {case:<26} {t_fast * 1e3:>8.2f}ms {t_ref * 1e3:>8.2f}ms "
              f"{t_ref / t_fast:>7.1f}x")


if __name__ == "__main__":
    main()
