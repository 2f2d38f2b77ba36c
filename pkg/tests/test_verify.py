import numpy as np
import pytest

from crisptree.actions import ActionBounds
from crisptree.tree import CrispLeafDim, CrispPredicate, CrispTree, crisp_predict_batch
from crisptree.verify import Box, enumerate_regions, leaf_output_range, verify_bounds

from test_tree import random_policy


def depth1_tree(threshold=0.5, greater=True, biases=(1.0, -1.0)):
    nodes = [CrispPredicate(feature=0, threshold=threshold, greater=greater)]
    leaves = [
        [CrispLeafDim(pairs=[], bias=biases[0], std=0.1)],
        [CrispLeafDim(pairs=[], bias=biases[1], std=0.1)],
    ]
    return CrispTree(depth=1, m=1, action_dim=1, e=0, nodes=nodes, leaves=leaves,
                     bounds=ActionBounds([-1.0], [1.0]))


def test_depth1_two_feasible_regions():
    tree = depth1_tree()
    regions = enumerate_regions(tree, Box(np.array([0.0]), np.array([1.0])))
    assert len(regions) == 2
    assert all(r.feasible for r in regions)
    left = next(r for r in regions if r.leaf_index == 0)
    right = next(r for r in regions if r.leaf_index == 1)
    assert left.box.lo[0] == 0.5 and left.box.hi[0] == 1.0
    assert right.box.lo[0] == 0.0 and right.box.hi[0] == 0.5


def test_out_of_domain_predicate_infeasible():
    tree = depth1_tree(threshold=2.0)
    regions = enumerate_regions(tree, Box(np.array([0.0]), np.array([1.0])))
    true_region = next(r for r in regions if r.leaf_index == 0)
    assert not true_region.feasible
    assert true_region.raw_range is None


def test_region_volumes_sum_to_domain_volume(rng):
    """Monte-Carlo-free exactness check on random trees: the feasible boxes
    tile the domain."""
    for _ in range(20):
        depth = int(rng.integers(1, 5))
        m = int(rng.integers(1, 5))
        tp = random_policy(rng, depth=depth, m=m, e=min(1, m))
        tree = tp.to_crisp()
        domain = Box(-np.ones(m), np.ones(m))
        regions = enumerate_regions(tree, domain)
        assert len(regions) == 2 ** depth
        vol = sum(r.box.volume() for r in regions if r.feasible)
        assert vol == pytest.approx(domain.volume(), abs=1e-9)


def test_feasible_regions_partition_samples(rng):
    """Every sampled state lands in exactly one feasible region, the one its
    routing reaches."""
    tp = random_policy(rng, depth=3, m=3, e=1)
    tree = tp.to_crisp()
    regions = enumerate_regions(tree, Box(-np.ones(3), np.ones(3)))
    X = rng.uniform(-1, 1, size=(500, 3))
    for x in X:
        hits = [r for r in regions if r.feasible and r.box.contains(x)]
        # boundary states can touch two boxes; interior states exactly one
        assert 1 <= len(hits) <= 2
        routed = tree.route(x)
        assert any(r.leaf_index == routed for r in hits)


def test_leaf_range_constant_and_single_coefficient():
    box = Box(np.array([0.0, -1.0]), np.array([1.0, 2.0]))
    constant = CrispLeafDim(pairs=[], bias=3.0, std=0.1)
    assert leaf_output_range(constant, box).tolist() == [3.0, 3.0]
    lin = CrispLeafDim(pairs=[(0, 2.0)], bias=0.0, std=0.1)
    assert leaf_output_range(lin, box).tolist() == [0.0, 2.0]
    neg = CrispLeafDim(pairs=[(1, -1.0)], bias=1.0, std=0.1)
    assert leaf_output_range(neg, box).tolist() == [-1.0, 2.0]


def test_leaf_range_bounds_grid_samples(rng):
    """Grid oracle: the analytic range contains every sampled output and is
    tight to within 5% of its width."""
    for _ in range(20):
        m = 4
        pairs = [(int(j), float(rng.normal())) for j in rng.choice(m, size=2, replace=False)]
        ld = CrispLeafDim(pairs=sorted(pairs), bias=float(rng.normal()), std=0.1)
        lo = rng.uniform(-2, 0, size=m)
        hi = lo + rng.uniform(0.5, 2.0, size=m)
        box = Box(lo, hi)
        a_lo, a_hi = leaf_output_range(ld, box)
        grid = rng.uniform(lo, hi, size=(10_000, m))
        vals = grid @ _coef_vector(ld, m) + ld.bias
        assert a_lo <= vals.min() + 1e-12
        assert vals.max() <= a_hi + 1e-12
        width = a_hi - a_lo
        assert vals.min() - a_lo <= 0.05 * width
        assert a_hi - vals.max() <= 0.05 * width


def _coef_vector(ld, m):
    c = np.zeros(m)
    for j, v in ld.pairs:
        c[j] = v
    return c


def test_verifier_full_squashed_range_always_passes(rng):
    tp = random_policy(rng, depth=3, m=3, e=2)
    tree = tp.to_crisp()
    limits = np.stack([tree.bounds.low, tree.bounds.high], axis=1)
    result = verify_bounds(tree, Box(-np.ones(3), np.ones(3)), limits)
    assert result.passed


def test_verifier_names_exactly_the_violating_region():
    tree = depth1_tree(biases=(5.0, 0.0))  # left leaf squashes to ~1.0
    limits = [[-0.9, 0.9]]
    result = verify_bounds(tree, Box(np.array([0.0]), np.array([1.0])), limits)
    assert not result.passed
    assert len(result.violations) == 1
    v = result.violations[0]
    assert v.region.leaf_index == 0
    assert v.region.path == [(0, ">", 0.5)]
    assert "x0 > 0.5" in result.summary()


def test_verifier_agrees_with_sampling_oracle(rng):
    """verifier FAIL <=> the sampler finds a violating state (the verifier is
    the stricter side near boundaries)."""
    for _ in range(10):
        tp = random_policy(rng, depth=3, m=3, e=1)
        tree = tp.to_crisp()
        domain = Box(-np.ones(3), np.ones(3))
        limit = rng.uniform(0.2, 1.0)
        limits = [[-limit, limit]] * tree.action_dim
        result = verify_bounds(tree, domain, limits)
        X = rng.uniform(-1, 1, size=(20_000, 3))
        actions = crisp_predict_batch(tree, X)
        sampler_found = bool(np.any((actions < -limit) | (actions > limit)))
        if sampler_found:
            assert not result.passed
        # verifier may fail when the sampler misses a thin region: one-sided


def test_sound_no_sample_escapes_its_region_range(rng):
    for _ in range(5):
        tp = random_policy(rng, depth=4, m=4, e=2, action_dim=2)
        tree = tp.to_crisp()
        regions = enumerate_regions(tree, Box(-np.ones(4), np.ones(4)))
        by_leaf = {}
        for r in regions:
            if r.feasible:
                by_leaf.setdefault(r.leaf_index, []).append(r)
        X = rng.uniform(-1, 1, size=(2000, 4))
        acts = crisp_predict_batch(tree, X)
        c, h = tree.bounds.center, tree.bounds.half
        for x, a in zip(X, acts):
            leaf = tree.route(x)
            region = next(r for r in by_leaf[leaf] if r.box.contains(x))
            for d in range(tree.action_dim):
                lo = c[d] + h[d] * np.tanh(region.raw_range[d][0])
                hi = c[d] + h[d] * np.tanh(region.raw_range[d][1])
                assert lo - 1e-9 <= a[d] <= hi + 1e-9


def test_determinism_identical_reports(rng):
    tp = random_policy(rng, depth=3, m=3, e=1)
    tree = tp.to_crisp()
    domain = Box(-np.ones(3), np.ones(3))
    r1 = enumerate_regions(tree, domain)
    r2 = enumerate_regions(tree, domain)
    for a, b in zip(r1, r2):
        assert a.path == b.path and a.feasible == b.feasible
        assert np.array_equal(a.box.lo, b.box.lo) and np.array_equal(a.box.hi, b.box.hi)


def test_cost_grows_linearly_per_region(rng):
    """Intersection count equals the number of internal path steps: depth
    per region, linear in depth."""
    for depth in (1, 2, 3, 4, 5):
        tp = random_policy(rng, depth=depth, m=3, e=1)
        tree = tp.to_crisp()
        stats = {}
        regions = enumerate_regions(tree, Box(-np.ones(3), np.ones(3)), stats=stats)
        assert stats["intersections"] == 2 ** depth - 1  # one per internal node
        assert len(regions) == 2 ** depth
        # per-region work: at most depth intersections on its path
        assert stats["intersections"] <= len(regions) * depth
