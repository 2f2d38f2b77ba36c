import math

import numpy as np
import pytest

from crisptree.deepen import (
    DeepenConfig,
    LeafEntropyVector,
    behavioral_deviation,
    deepen_loop,
    estimate_leaf_entropies,
    init_deeper,
)
from crisptree.envs import make_env
from crisptree.sac import TrainerConfig
from crisptree.tree import TreePolicy

from test_tree import random_policy


def test_init_deeper_doubles_leaves(rng):
    tp = random_policy(rng, depth=1, m=2, e=1)
    deep = init_deeper(tp)
    assert deep.n_leaves == 4
    assert deep.depth == 2


def test_init_deeper_top_levels_bit_equal(rng):
    tp = random_policy(rng, depth=2, m=3, e=1)
    deep = init_deeper(tp)
    for a, b in zip(tp.nodes, deep.nodes[: tp.n_nodes]):
        assert np.array_equal(a.w.data, b.w.data)
        assert a.b.data == b.b.data and a.alpha.data == b.alpha.data


def test_init_deeper_zero_perturbation_is_behaviorally_equivalent(rng):
    for e in (0, 1, 3):
        tp = random_policy(rng, depth=2, m=3, e=e, action_dim=2)
        deep = init_deeper(tp, perturb=0.0)
        X = rng.normal(size=(1000, 3)) * 2
        assert behavioral_deviation(tp, deep, X) <= 1e-6


def test_entropy_constant_leaf_matches_analytic(rng):
    """A leaf emitting a constant mean with gamma = 1 has per-dim entropy
    0.5 ln(2 pi e) ~ 1.4189 nats."""
    tp = TreePolicy(depth=1, m=1, action_dim=1, e=0, seed=0)
    for leaf in tp.leaves:
        leaf.log_gamma[0].data = np.asarray(0.0)  # gamma = 1
        leaf.static[0].data = np.asarray(0.3)
    X = rng.uniform(-1, 1, size=(200, 1))
    vec = estimate_leaf_entropies(tp, X)
    want = 0.5 * math.log(2 * math.pi * math.e)
    for li in range(2):
        if vec.visited[li]:
            assert vec.entropy[li] == pytest.approx(want, abs=1e-9)


def test_entropy_doubling_gamma_adds_ln2(rng):
    tp = TreePolicy(depth=1, m=1, action_dim=1, e=0, seed=0)
    X = rng.uniform(-1, 1, size=(200, 1))
    for leaf in tp.leaves:
        leaf.log_gamma[0].data = np.asarray(0.0)
    h1 = estimate_leaf_entropies(tp, X)
    for leaf in tp.leaves:
        leaf.log_gamma[0].data = np.asarray(math.log(2.0))
    h2 = estimate_leaf_entropies(tp, X)
    for li in range(2):
        if h1.visited[li]:
            assert h2.entropy[li] - h1.entropy[li] == pytest.approx(math.log(2.0), abs=1e-9)


def test_entropy_empirical_gaussian_within_tolerance(rng):
    """Monte-Carlo oracle: means drawn from N(0, 2^2) with tiny gamma give
    entropy ~ 0.5 ln(2 pi e * 4) within +-0.05 nats."""
    tp = TreePolicy(depth=1, m=1, action_dim=1, e=1, seed=0)
    # route everything to one leaf: threshold far left
    tp.nodes[0].w.data[:] = [1.0]
    tp.nodes[0].b.data = np.asarray(-100.0)
    leaf = tp.leaves[0]
    leaf.theta[0].data[:] = [1.0]
    sigma = 2.0
    leaf.beta[0].data[:] = [sigma]
    leaf.phi[0].data[:] = [0.0]
    leaf.log_gamma[0].data = np.asarray(-30.0)  # clamps to 1e-6
    X = rng.normal(size=(10_000, 1))  # means = sigma * x ~ N(0, sigma^2)
    vec = estimate_leaf_entropies(tp, X)
    want = 0.5 * math.log(2 * math.pi * math.e * sigma * sigma)
    assert vec.entropy[0] == pytest.approx(want, abs=0.05)


def test_entropy_unvisited_flagging(rng):
    tp = TreePolicy(depth=1, m=1, action_dim=1, e=1, seed=0)
    tp.nodes[0].w.data[:] = [1.0]
    tp.nodes[0].b.data = np.asarray(-100.0)  # always left
    X = rng.normal(size=(50, 1))
    vec = estimate_leaf_entropies(tp, X)
    assert vec.visited[0] and not vec.visited[1]
    assert math.isnan(vec.entropy[1])
    with pytest.raises(ValueError):
        estimate_leaf_entropies(tp, X[:2])  # too few for any leaf


def test_aggregate_is_visit_weighted():
    vec = LeafEntropyVector(entropy=np.array([1.0, 3.0]), visits=np.array([30, 10]))
    assert vec.aggregate() == pytest.approx((30 * 1.0 + 10 * 3.0) / 40)


def test_infinite_epsilon_never_swaps():
    env = make_env("plateau4")
    model = TreePolicy(depth=1, m=1, action_dim=1, e=1, seed=0,
                       action_low=[-1], action_high=[1])
    cfg = DeepenConfig(epsilon=float("inf"), epochs=3, episodes_per_epoch=2,
                       sac_updates_per_epoch=5, imitation_steps_per_epoch=5,
                       imitation_batch=16, seed=0)
    tcfg = TrainerConfig(batch_size=16, warmup_steps=0, total_steps=0,
                         critic_hidden=(16,), seed=0)
    result = deepen_loop(model, env, cfg, tcfg)
    assert result.model.depth == 1
    assert not any(e.swapped for e in result.log)
    assert all(e.depth == 1 for e in result.log)


def test_depth_nondecreasing_and_one_swap_per_epoch():
    env = make_env("plateau4")
    model = TreePolicy(depth=1, m=1, action_dim=1, e=1, seed=1,
                       action_low=[-1], action_high=[1])
    cfg = DeepenConfig(epsilon=0.0, epochs=6, episodes_per_epoch=2,
                       sac_updates_per_epoch=20, imitation_steps_per_epoch=40,
                       imitation_batch=32, seed=1)
    tcfg = TrainerConfig(batch_size=32, warmup_steps=0, total_steps=0,
                         critic_hidden=(16, 16), seed=1)
    result = deepen_loop(model, env, cfg, tcfg)
    depths = [e.depth for e in result.log]
    assert all(b >= a for a, b in zip(depths, depths[1:]))
    swaps = sum(e.swapped for e in result.log)
    assert result.model.depth == 1 + swaps  # at most one deepening per epoch
    for dev in result.swap_checks:
        assert dev <= 1e-6


def test_swap_condition_matches_log():
    env = make_env("plateau4")
    model = TreePolicy(depth=1, m=1, action_dim=1, e=1, seed=2,
                       action_low=[-1], action_high=[1])
    eps = 0.05
    cfg = DeepenConfig(epsilon=eps, epochs=4, episodes_per_epoch=2,
                       sac_updates_per_epoch=10, imitation_steps_per_epoch=20,
                       imitation_batch=32, seed=2)
    tcfg = TrainerConfig(batch_size=32, warmup_steps=0, total_steps=0,
                         critic_hidden=(16,), seed=2)
    result = deepen_loop(model, env, cfg, tcfg)
    for e in result.log:
        if not math.isnan(e.entropy_live):
            assert e.swapped == (e.entropy_deep + eps < e.entropy_live)
