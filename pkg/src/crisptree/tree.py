"""Decision-tree policies with hard single-feature splits and sparse linear
leaf controllers, differentiable end to end.

The tree is complete: 2^depth - 1 decision nodes in breadth-first (heap)
order and 2^depth leaves. Every forward pass crispifies each node to a
single-feature threshold test and each branch outcome to a Boolean, using
straight-through hard selections, so the policy that is trained is the same
policy that the exported crisp tree executes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import actions as act_head
from . import autodiff as ad
from .actions import ActionBounds

GAMMA_MIN = 1e-6
GAMMA_MAX = 10.0

STRAIGHT_THROUGH = "straight_through"
GUMBEL = "gumbel"


@dataclass
class DecisionNode:
    """w, b, alpha of one split: branch left iff alpha*(w_k x_k - b) > 0."""

    w: ad.Value
    b: ad.Value
    alpha: ad.Value


@dataclass
class Leaf:
    """Per action dimension: controller weights, selector weights, biases,
    an unconstrained log standard deviation, and (when e == 0) a dedicated
    scalar mean."""

    beta: list
    theta: list
    phi: list
    log_gamma: list
    static: list


class TreePolicy:
    """Complete binary tree of crispified decision nodes over m features."""

    def __init__(self, depth, m, action_dim, e, seed=0,
                 variant=STRAIGHT_THROUGH, gumbel_tau=1.0,
                 action_low=None, action_high=None):
        if depth < 1:
            raise ValueError(f"depth must be >= 1, got {depth}")
        if not 0 <= e <= m:
            raise ValueError(f"controller sparsity e={e} out of range 0..{m}")
        if variant not in (STRAIGHT_THROUGH, GUMBEL):
            raise ValueError(f"unknown variant {variant!r}")
        self.depth = depth
        self.m = m
        self.action_dim = action_dim
        self.e = e
        self.seed = seed
        self.variant = variant
        self.gumbel_tau = gumbel_tau
        if action_low is None:
            action_low = -np.ones(action_dim)
        if action_high is None:
            action_high = np.ones(action_dim)
        self.bounds = ActionBounds(action_low, action_high)

        rng = np.random.default_rng(seed)
        lim = 1.0 / math.sqrt(m)
        n_nodes = 2 ** depth - 1
        n_leaves = 2 ** depth
        self.nodes = [
            DecisionNode(
                w=ad.param(rng.uniform(-lim, lim, size=m)),
                b=ad.param(0.0),
                alpha=ad.param(1.0),
            )
            for _ in range(n_nodes)
        ]
        self.leaves = []
        for _ in range(n_leaves):
            self.leaves.append(
                Leaf(
                    beta=[ad.param(rng.uniform(-lim, lim, size=m)) for _ in range(action_dim)],
                    theta=[ad.param(rng.uniform(-lim, lim, size=m)) for _ in range(action_dim)],
                    phi=[ad.param(np.zeros(m)) for _ in range(action_dim)],
                    log_gamma=[ad.param(0.0) for _ in range(action_dim)],
                    static=[ad.param(0.0) for _ in range(action_dim)],
                )
            )

    # -- structure ---------------------------------------------------------

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_leaves(self) -> int:
        return len(self.leaves)

    def parameters(self):
        for node in self.nodes:
            yield node.w
            yield node.b
            yield node.alpha
        for leaf in self.leaves:
            for d in range(self.action_dim):
                if self.e == 0:
                    yield leaf.static[d]
                else:
                    yield leaf.beta[d]
                    yield leaf.theta[d]
                    yield leaf.phi[d]
                yield leaf.log_gamma[d]

    def gamma(self, leaf: Leaf, d: int) -> ad.Value:
        g = ad.exp(leaf.log_gamma[d])
        return ad.maximum(ad.minimum(g, GAMMA_MAX), GAMMA_MIN)

    # -- crispification ----------------------------------------------------

    def _select_one(self, scores: ad.Value, rng) -> ad.Value:
        if self.variant == GUMBEL:
            soft = ad.gumbel_softmax(scores, self.gumbel_tau, rng)
            return _st_onehot(soft)
        return ad.diff_argmax(scores)

    def _select_k(self, scores: ad.Value, k: int, rng) -> ad.Value:
        if self.variant == GUMBEL:
            soft = ad.gumbel_softmax(scores, self.gumbel_tau, rng)
            return _st_khot(soft, k)
        return ad.diff_khot(scores, k)

    def node_crisp(self, node: DecisionNode, x: ad.Value, rng=None) -> ad.Value:
        """alpha * (w_k x_k - b) with k the largest-magnitude weight index.

        Gradient reaches the full w vector through the softmax soft path.
        """
        z = self._select_one(ad.absolute(node.w), rng)
        w_eff = ad.mul(z, node.w)
        return ad.scale(ad.sub(ad.dot(w_eff, x), node.b), node.alpha)

    def outcome_crisp(self, logit: ad.Value, rng=None) -> ad.Value:
        """Boolean branch bit 1(logit > 0): first component of the hard
        one-hot over [logit, 0], with the softmax-pair gradient."""
        if self.variant == GUMBEL:
            noise = ad.sample_gumbel((2,), rng)
            shifted = ad.scale(ad.add(logit, noise[0] - noise[1]), 1.0 / self.gumbel_tau)
            return ad.hard_step(shifted)
        return ad.hard_step(logit)

    def route(self, x: ad.Value, rng=None):
        """Descend from the root (left on 1, right on 0) to a leaf.

        Returns (leaf_index, indicator) where indicator is the product of
        per-step branch indicators: identically 1.0 in value, but it carries
        the taken path's gradients.
        """
        i = 0
        indicator = None
        while i < self.n_nodes:
            bit = self.outcome_crisp(self.node_crisp(self.nodes[i], x, rng), rng)
            if bit.data > 0.5:
                step = bit
                i = 2 * i + 1
            else:
                step = ad.sub(1.0, bit)
                i = 2 * i + 2
            indicator = step if indicator is None else ad.mul(indicator, step)
        return i - (self.n_leaves - 1), indicator

    def leaf_mean(self, leaf: Leaf, x: ad.Value, d: int, rng=None) -> ad.Value:
        """Sparse controller mean for one action dim: (u.b)'(u.x) + u'phi,
        with u the top-e selector mask; a dedicated scalar when e == 0."""
        if self.e == 0:
            return leaf.static[d]
        u = self._select_k(ad.absolute(leaf.theta[d]), self.e, rng)
        lin = ad.dot(ad.mul(u, leaf.beta[d]), ad.mul(u, x))
        return ad.add(lin, ad.dot(u, leaf.phi[d]))

    # -- action determination ----------------------------------------------

    def act(self, x, training: bool = False, rng=None) -> "ActionOutput":
        """Crispify, route, sparsify the reached controller, then sample
        (training) or return the squashed mean."""
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.m,):
            raise ValueError(f"expected state of shape ({self.m},), got {x.shape}")
        if not np.all(np.isfinite(x)):
            raise ValueError("state contains NaN or infinity")
        if self.variant == GUMBEL and rng is None:
            raise ValueError("gumbel variant needs an rng for routing noise")
        xv = ad.const(x)
        leaf_idx, indicator = self.route(xv, rng)
        leaf = self.leaves[leaf_idx]
        means = [
            ad.mul(self.leaf_mean(leaf, xv, d, rng), indicator)
            for d in range(self.action_dim)
        ]
        stds = [self.gamma(leaf, d) for d in range(self.action_dim)]
        if training:
            if rng is None:
                raise ValueError("training-mode act needs an rng")
            noise = [rng.standard_normal() for _ in range(self.action_dim)]
            action, raw, lp = act_head.sample(means, stds, self.bounds, noise)
        else:
            action, lp = act_head.deterministic(means, stds, self.bounds)
            raw = means
        return ActionOutput(mean=means, std=stds, action=action, raw=raw,
                            log_prob=lp, leaf_index=leaf_idx)

    def forward_batch(self, X: np.ndarray, training: bool, rng=None):
        """Vectorized act over a batch of states.

        Matches the per-state semantics exactly: each sample's output is the
        reached leaf's controller times that sample's path indicator, so the
        gradient touches only parameters along taken paths.
        """
        X = np.asarray(X, dtype=np.float64)
        B = X.shape[0]
        if X.shape != (B, self.m):
            raise ValueError(f"expected batch of shape (B, {self.m}), got {X.shape}")
        if self.variant == GUMBEL and rng is None:
            raise ValueError("gumbel variant needs an rng for routing noise")
        Xc = ad.const(X)

        bits = []
        for node in self.nodes:
            z = self._select_one(ad.absolute(node.w), rng)
            w_eff = ad.mul(z, node.w)
            logit = ad.scale(ad.sub(ad.matmul(Xc, w_eff), node.b), node.alpha)
            if self.variant == GUMBEL:
                delta = ad.sample_gumbel((B,), rng) - ad.sample_gumbel((B,), rng)
                logit = ad.scale(ad.add(logit, ad.const(delta)), 1.0 / self.gumbel_tau)
            bits.append(ad.hard_step(logit))
        hard = np.stack([b.data for b in bits], axis=1) > 0.5  # (B, n_nodes)

        # integer descent to leaf indices, and per-node pass/went-left masks
        passes = np.zeros((B, self.n_nodes), dtype=bool)
        ptr = np.zeros(B, dtype=np.int64)
        for _ in range(self.depth):
            passes[np.arange(B), ptr] = True
            went_left = hard[np.arange(B), ptr]
            ptr = np.where(went_left, 2 * ptr + 1, 2 * ptr + 2)
        leaf_idx = ptr - (self.n_leaves - 1)

        # product over levels of the taken branch indicator (all ones in value)
        indicator = None
        node = 0
        for level in range(self.depth):
            width = 2 ** level
            factor = None
            for i in range(node, node + width):
                go_l = passes[:, i] & hard[:, i]
                go_r = passes[:, i] & ~hard[:, i]
                term = None
                if go_l.any():
                    term = ad.mul(ad.const(go_l.astype(np.float64)), bits[i])
                if go_r.any():
                    t_r = ad.mul(ad.const(go_r.astype(np.float64)), ad.sub(1.0, bits[i]))
                    term = t_r if term is None else ad.add(term, t_r)
                if term is not None:
                    factor = term if factor is None else ad.add(factor, term)
            node += width
            indicator = factor if indicator is None else ad.mul(indicator, factor)

        zeros_b = ad.const(np.zeros(B))
        means, stds = [], []
        for d in range(self.action_dim):
            mean_d = None
            std_d = None
            for li in range(self.n_leaves):
                mask = leaf_idx == li
                if not mask.any():
                    continue
                mc = ad.const(mask.astype(np.float64))
                leaf = self.leaves[li]
                if self.e == 0:
                    lm = ad.add(zeros_b, leaf.static[d])
                else:
                    u = self._select_k(ad.absolute(leaf.theta[d]), self.e, rng)
                    # (u.beta)'(u.x) == (u*u*beta)'x, including the gradient
                    # through both occurrences of u (binary u squares to itself)
                    lin = ad.matmul(Xc, ad.mul(ad.mul(u, u), leaf.beta[d]))
                    lm = ad.add(lin, ad.dot(u, leaf.phi[d]))
                term = ad.mul(mc, lm)
                mean_d = term if mean_d is None else ad.add(mean_d, term)
                s = ad.scale(mc, self.gamma(leaf, d))
                std_d = s if std_d is None else ad.add(std_d, s)
            means.append(ad.mul(mean_d, indicator))
            stds.append(std_d)

        if training:
            noise = [rng.standard_normal(B) for _ in range(self.action_dim)]
            action, raw, lp = act_head.sample(means, stds, self.bounds, noise)
            return BatchOutput(means, stds, action, raw, lp, leaf_idx)
        action, lp = act_head.deterministic(means, stds, self.bounds)
        return BatchOutput(means, stds, action, means, lp, leaf_idx)

    def log_prob_of_raw(self, X: np.ndarray, raw_actions: np.ndarray, rng=None):
        """log pi of given pre-squash actions (used for behavior cloning)."""
        out = self.forward_batch(X, training=False, rng=rng)
        raws = [ad.const(raw_actions[:, d]) for d in range(self.action_dim)]
        return act_head.log_prob(raws, out.mean, out.std, self.bounds)

    # -- interpretable export ----------------------------------------------

    def to_crisp(self) -> "CrispTree":
        """Reduce every node to a single-feature threshold predicate and
        every leaf to its e active (index, coefficient) pairs. Lossless for
        deterministic inference."""
        preds = []
        for i, node in enumerate(self.nodes):
            k = int(np.argmax(np.abs(node.w.data)))
            wk = float(node.w.data[k])
            aw = float(node.alpha.data) * wk
            if wk == 0.0 or aw == 0.0:
                raise ValueError(f"node {i}: degenerate predicate (w[{k}]*alpha == 0)")
            preds.append(CrispPredicate(feature=k, threshold=float(node.b.data) / wk,
                                        greater=aw > 0.0))
        leaves = []
        for leaf in self.leaves:
            dims = []
            for d in range(self.action_dim):
                std = float(np.clip(math.exp(float(leaf.log_gamma[d].data)),
                                    GAMMA_MIN, GAMMA_MAX))
                if self.e == 0:
                    dims.append(CrispLeafDim(pairs=[], bias=float(leaf.static[d].data), std=std))
                    continue
                order = np.argsort(-np.abs(leaf.theta[d].data), kind="stable")[: self.e]
                idx = np.sort(order)
                pairs = [(int(j), float(leaf.beta[d].data[j])) for j in idx]
                bias = float(leaf.phi[d].data[idx].sum())
                dims.append(CrispLeafDim(pairs=pairs, bias=bias, std=std))
            leaves.append(dims)
        return CrispTree(depth=self.depth, m=self.m, action_dim=self.action_dim,
                         e=self.e, nodes=preds, leaves=leaves, bounds=self.bounds)

    # -- diagnostics ---------------------------------------------------------

    def count_params(self):
        return count_params(self)

    def l1_penalty(self, coeff: float) -> ad.Value:
        """coeff * sum |beta|; only meaningful for complete controllers."""
        if self.e != self.m:
            raise ValueError("L1 penalty applies to complete controllers (e == m)")
        total = None
        for leaf in self.leaves:
            for d in range(self.action_dim):
                t = ad.reduce_sum(ad.absolute(leaf.beta[d]))
                total = t if total is None else ad.add(total, t)
        return ad.scale(total, coeff)


def _st_onehot(soft: ad.Value) -> ad.Value:
    """Hard one-hot of a soft distribution, gradient passing to ``soft``."""
    hard = np.zeros_like(soft.data)
    hard[int(np.argmax(soft.data))] = 1.0
    return ad.add(ad.sub(soft, ad.const(soft.data.copy())), ad.const(hard))


def _st_khot(soft: ad.Value, k: int) -> ad.Value:
    if not 0 <= k <= soft.data.size:
        raise ValueError(f"k={k} out of range for length {soft.data.size}")
    hard = np.zeros_like(soft.data)
    if k > 0:
        hard[np.argsort(-soft.data, kind="stable")[:k]] = 1.0
    return ad.add(ad.sub(soft, ad.const(soft.data.copy())), ad.const(hard))


@dataclass
class ActionOutput:
    """Single-state result: per-dim mean/std/action Values, the scalar
    log-probability, and the index of the leaf that produced the action."""

    mean: list
    std: list
    action: list
    raw: list
    log_prob: ad.Value
    leaf_index: int

    def action_array(self) -> np.ndarray:
        return np.array([float(a.data) for a in self.action])

    def raw_array(self) -> np.ndarray:
        return np.array([float(r.data) for r in self.raw])


@dataclass
class BatchOutput:
    mean: list
    std: list
    action: list
    raw: list
    log_prob: ad.Value
    leaf_index: np.ndarray

    def action_matrix(self) -> np.ndarray:
        return np.stack([a.data for a in self.action], axis=1)

    def raw_matrix(self) -> np.ndarray:
        return np.stack([r.data for r in self.raw], axis=1)


@dataclass
class CrispPredicate:
    feature: int
    threshold: float
    greater: bool  # True: branch left iff x[feature] > threshold; False: <

    def holds(self, x) -> bool:
        v = x[self.feature]
        return v > self.threshold if self.greater else v < self.threshold


@dataclass
class CrispLeafDim:
    pairs: list  # (feature index, coefficient), ascending index
    bias: float
    std: float


@dataclass
class CrispTree:
    """Exported interpretable tree: threshold predicates at the nodes and
    sparse linear controllers (pre-squash) at the leaves."""

    depth: int
    m: int
    action_dim: int
    e: int
    nodes: list
    leaves: list  # per leaf: list of CrispLeafDim, one per action dim
    bounds: ActionBounds

    _flat: dict = field(default=None, repr=False, compare=False)

    @property
    def n_leaves(self) -> int:
        return 2 ** self.depth

    def flat(self) -> dict:
        """Dense-array form consumed by the inference kernels."""
        if self._flat is None:
            n_nodes = 2 ** self.depth - 1
            feat = np.array([p.feature for p in self.nodes], dtype=np.int64)
            thr = np.array([p.threshold for p in self.nodes], dtype=np.float64)
            gt = np.array([p.greater for p in self.nodes], dtype=np.int64)
            coefs = np.zeros((self.n_leaves, self.action_dim, self.m))
            bias = np.zeros((self.n_leaves, self.action_dim))
            for li, dims in enumerate(self.leaves):
                for d, ld in enumerate(dims):
                    bias[li, d] = ld.bias
                    for j, c in ld.pairs:
                        coefs[li, d, j] = c
            self._flat = {
                "n_nodes": n_nodes,
                "depth": self.depth,
                "feature": feat,
                "threshold": thr,
                "greater": gt,
                "coefs": coefs,
                "bias": bias,
                "center": self.bounds.center,
                "half": self.bounds.half,
            }
        return self._flat

    def route(self, x) -> int:
        i = 0
        n_nodes = 2 ** self.depth - 1
        while i < n_nodes:
            i = 2 * i + 1 if self.nodes[i].holds(x) else 2 * i + 2
        return i - (self.n_leaves - 1)


def crisp_predict(tree: CrispTree, x) -> np.ndarray:
    """Comparison-based descent plus sparse linear evaluation and squashing;
    no differentiation machinery involved."""
    from .kernels import tree_predict

    x = np.asarray(x, dtype=np.float64)
    if x.shape != (tree.m,):
        raise ValueError(f"expected state of shape ({tree.m},), got {x.shape}")
    return tree_predict(tree.flat(), x[None, :])[0]


def crisp_predict_batch(tree: CrispTree, X) -> np.ndarray:
    from .kernels import tree_predict

    X = np.asarray(X, dtype=np.float64)
    return tree_predict(tree.flat(), X)


def count_params(model) -> tuple[int, int]:
    """(total stored reals, parameters surviving crispification).

    Active convention: 2 per node (feature choice + threshold) and, per leaf
    per action dim, 2e controller (index, coefficient) entries + bias + std.
    A CrispTree stores nothing but its active values.
    """
    n_nodes, n_leaves = 2 ** model.depth - 1, 2 ** model.depth
    m, adim, e = model.m, model.action_dim, model.e
    active = n_nodes * 2 + n_leaves * adim * (2 * e + 2)
    if isinstance(model, CrispTree):
        return active, active
    per_dim = 3 * m + 1 + (1 if e == 0 else 0)  # beta, theta, phi, log_gamma (+static)
    total = n_nodes * (m + 2) + n_leaves * adim * per_dim
    return total, active
