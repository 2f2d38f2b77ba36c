"""Comparator policies: soft-routed decision trees (with static or linear
leaves) and their post-hoc crispified forms, plus Gaussian MLP actors.

The soft tree routes every state through *all* leaves with sigmoid branch
probabilities; converting it to a crisp tree after training changes its
behavior, which is exactly the inconsistency the crispified-by-construction
tree policy avoids.
"""

from __future__ import annotations

import math

import numpy as np

from . import actions as act_head
from . import autodiff as ad
from . import nn
from .actions import ActionBounds
from .tree import (
    GAMMA_MAX,
    GAMMA_MIN,
    ActionOutput,
    BatchOutput,
    CrispLeafDim,
    CrispPredicate,
    CrispTree,
)

STATIC = "static"
LINEAR = "linear"


class SoftTreePolicy:
    """Fuzzy decision tree: every node weighs all features, every leaf
    contributes to the output in proportion to its routing probability."""

    def __init__(self, depth, m, action_dim, leaf_kind=STATIC, seed=0,
                 action_low=None, action_high=None):
        if depth < 1:
            raise ValueError(f"depth must be >= 1, got {depth}")
        if leaf_kind not in (STATIC, LINEAR):
            raise ValueError(f"unknown leaf kind {leaf_kind!r}")
        self.depth = depth
        self.m = m
        self.action_dim = action_dim
        self.leaf_kind = leaf_kind
        self.seed = seed
        if action_low is None:
            action_low = -np.ones(action_dim)
        if action_high is None:
            action_high = np.ones(action_dim)
        self.bounds = ActionBounds(action_low, action_high)

        rng = np.random.default_rng(seed)
        lim = 1.0 / math.sqrt(m)
        self.node_w = [ad.param(rng.uniform(-lim, lim, size=m)) for _ in range(2 ** depth - 1)]
        self.node_b = [ad.param(0.0) for _ in range(2 ** depth - 1)]
        self.node_alpha = [ad.param(1.0) for _ in range(2 ** depth - 1)]
        n_leaves = 2 ** depth
        self.beta = [[ad.param(rng.uniform(-lim, lim, size=m)) for _ in range(action_dim)]
                     for _ in range(n_leaves)]
        self.phi = [[ad.param(np.zeros(m)) for _ in range(action_dim)]
                    for _ in range(n_leaves)]
        self.static = [[ad.param(rng.uniform(-lim, lim)) for _ in range(action_dim)]
                       for _ in range(n_leaves)]
        self.log_gamma = [[ad.param(0.0) for _ in range(action_dim)]
                          for _ in range(n_leaves)]

    @property
    def n_nodes(self):
        return len(self.node_w)

    @property
    def n_leaves(self):
        return 2 ** self.depth

    @property
    def e(self):
        return 0 if self.leaf_kind == STATIC else self.m

    def parameters(self):
        yield from self.node_w
        yield from self.node_b
        yield from self.node_alpha
        for li in range(self.n_leaves):
            for d in range(self.action_dim):
                if self.leaf_kind == LINEAR:
                    yield self.beta[li][d]
                    yield self.phi[li][d]
                else:
                    yield self.static[li][d]
                yield self.log_gamma[li][d]

    def gamma(self, li: int, d: int) -> ad.Value:
        g = ad.exp(self.log_gamma[li][d])
        return ad.maximum(ad.minimum(g, GAMMA_MAX), GAMMA_MIN)

    def _leaf_mean(self, li: int, d: int, Xc: ad.Value, zeros_b: ad.Value) -> ad.Value:
        if self.leaf_kind == STATIC:
            return ad.add(zeros_b, self.static[li][d])
        lin = ad.matmul(Xc, self.beta[li][d])
        return ad.add(lin, ad.reduce_sum(self.phi[li][d]))

    def forward_batch(self, X: np.ndarray, training: bool, rng=None) -> BatchOutput:
        """Soft mixture over all leaves: sigmoid node probabilities, path
        weights by products along each root-leaf path."""
        X = np.asarray(X, dtype=np.float64)
        B = X.shape[0]
        if X.shape != (B, self.m):
            raise ValueError(f"expected batch of shape (B, {self.m}), got {X.shape}")
        Xc = ad.const(X)
        ones_b = ad.const(np.ones(B))
        zeros_b = ad.const(np.zeros(B))

        # reach[i]: probability of visiting slot i (nodes then leaves, heap order)
        reach = {0: ones_b}
        for i in range(self.n_nodes):
            logit = ad.scale(ad.sub(ad.matmul(Xc, self.node_w[i]), self.node_b[i]),
                             self.node_alpha[i])
            y = ad.sigmoid(logit)
            reach[2 * i + 1] = ad.mul(reach[i], y)
            reach[2 * i + 2] = ad.mul(reach[i], ad.sub(1.0, y))

        means, stds = [], []
        for d in range(self.action_dim):
            mean_d, std_d = None, None
            for li in range(self.n_leaves):
                w = reach[self.n_nodes + li]
                term = ad.mul(w, self._leaf_mean(li, d, Xc, zeros_b))
                mean_d = term if mean_d is None else ad.add(mean_d, term)
                s = ad.scale(w, self.gamma(li, d))
                std_d = s if std_d is None else ad.add(std_d, s)
            means.append(mean_d)
            stds.append(std_d)

        if training:
            noise = [rng.standard_normal(B) for _ in range(self.action_dim)]
            action, raw, lp = act_head.sample(means, stds, self.bounds, noise)
            return BatchOutput(means, stds, action, raw, lp, None)
        action, lp = act_head.deterministic(means, stds, self.bounds)
        return BatchOutput(means, stds, action, means, lp, None)

    def act(self, x, training: bool = False, rng=None) -> ActionOutput:
        x = np.asarray(x, dtype=np.float64)
        if not np.all(np.isfinite(x)):
            raise ValueError("state contains NaN or infinity")
        out = self.forward_batch(x[None, :], training, rng)
        return _single_from_batch(out)

    def path_weights(self, x) -> np.ndarray:
        """Routing probabilities of all leaves for one state (sums to 1)."""
        out = {}
        x = np.asarray(x, dtype=np.float64)
        reach = {0: 1.0}
        for i in range(self.n_nodes):
            w, b = self.node_w[i].data, float(self.node_b[i].data)
            a = float(self.node_alpha[i].data)
            logit = a * (w @ x - b)
            y = 1.0 / (1.0 + np.exp(-np.clip(logit, -500, 500)))
            reach[2 * i + 1] = reach[i] * y
            reach[2 * i + 2] = reach[i] * (1.0 - y)
        return np.array([reach[self.n_nodes + li] for li in range(self.n_leaves)])

    def to_crisp(self) -> CrispTree:
        return crispify_soft_tree(self)

    def count_params(self):
        n, l = self.n_nodes, self.n_leaves
        stored = 2 if self.leaf_kind == STATIC else (2 * self.m + 1)
        active = 2 if self.leaf_kind == STATIC else (2 * self.m + 2)
        total = n * (self.m + 2) + l * self.action_dim * stored
        return total, n * 2 + l * self.action_dim * active


def cddt_forward(model: SoftTreePolicy, x) -> np.ndarray:
    """Pre-squash mixture mean per action dim for one state (no gradients)."""
    pw = model.path_weights(x)
    x = np.asarray(x, dtype=np.float64)
    out = np.zeros(model.action_dim)
    for d in range(model.action_dim):
        for li in range(model.n_leaves):
            if model.leaf_kind == STATIC:
                lm = float(model.static[li][d].data)
            else:
                lm = float(model.beta[li][d].data @ x + model.phi[li][d].data.sum())
            out[d] += pw[li] * lm
    return out


def crispify_soft_tree(model: SoftTreePolicy) -> CrispTree:
    """Post-hoc crispification: single-feature hard predicates, one leaf per
    state. Generally disagrees with the soft forward pass."""
    preds = []
    for i in range(model.n_nodes):
        w = model.node_w[i].data
        k = int(np.argmax(np.abs(w)))
        wk = float(w[k])
        aw = float(model.node_alpha[i].data) * wk
        if wk == 0.0 or aw == 0.0:
            raise ValueError(f"node {i}: degenerate predicate (w[{k}]*alpha == 0)")
        preds.append(CrispPredicate(feature=k, threshold=float(model.node_b[i].data) / wk,
                                    greater=aw > 0.0))
    leaves = []
    for li in range(model.n_leaves):
        dims = []
        for d in range(model.action_dim):
            std = float(np.clip(math.exp(float(model.log_gamma[li][d].data)),
                                GAMMA_MIN, GAMMA_MAX))
            if model.leaf_kind == STATIC:
                dims.append(CrispLeafDim(pairs=[], bias=float(model.static[li][d].data), std=std))
            else:
                pairs = [(j, float(model.beta[li][d].data[j])) for j in range(model.m)]
                dims.append(CrispLeafDim(pairs=pairs,
                                         bias=float(model.phi[li][d].data.sum()), std=std))
        leaves.append(dims)
    return CrispTree(depth=model.depth, m=model.m, action_dim=model.action_dim,
                     e=model.e, nodes=preds, leaves=leaves, bounds=model.bounds)


class MlpActor:
    """Gaussian MLP policy with the shared squashed-action head."""

    LOG_STD_MIN = -20.0
    LOG_STD_MAX = 2.0

    def __init__(self, m, action_dim, hidden, seed=0, action_low=None, action_high=None):
        self.m = m
        self.action_dim = action_dim
        self.hidden = list(hidden)
        self.seed = seed
        if action_low is None:
            action_low = -np.ones(action_dim)
        if action_high is None:
            action_high = np.ones(action_dim)
        self.bounds = ActionBounds(action_low, action_high)
        rng = np.random.default_rng(seed)
        self.trunk = []
        d_in = m
        for h in self.hidden:
            self.trunk.append(nn.Linear(d_in, h, rng))
            d_in = h
        self.mean_heads = [nn.Head(d_in, rng) for _ in range(action_dim)]
        self.log_std_heads = [nn.Head(d_in, rng) for _ in range(action_dim)]

    def parameters(self):
        for layer in self.trunk:
            yield from layer.parameters()
        for h in self.mean_heads:
            yield from h.parameters()
        for h in self.log_std_heads:
            yield from h.parameters()

    def forward_batch(self, X: np.ndarray, training: bool, rng=None) -> BatchOutput:
        X = np.asarray(X, dtype=np.float64)
        B = X.shape[0]
        if X.shape != (B, self.m):
            raise ValueError(f"expected batch of shape (B, {self.m}), got {X.shape}")
        h = ad.const(X)
        for layer in self.trunk:
            h = ad.relu(layer(h))
        means, stds = [], []
        for d in range(self.action_dim):
            means.append(self.mean_heads[d](h))
            ls = self.log_std_heads[d](h)
            ls = ad.maximum(ad.minimum(ls, self.LOG_STD_MAX), self.LOG_STD_MIN)
            stds.append(ad.exp(ls))
        if training:
            noise = [rng.standard_normal(B) for _ in range(self.action_dim)]
            action, raw, lp = act_head.sample(means, stds, self.bounds, noise)
            return BatchOutput(means, stds, action, raw, lp, None)
        action, lp = act_head.deterministic(means, stds, self.bounds)
        return BatchOutput(means, stds, action, means, lp, None)

    def act(self, x, training: bool = False, rng=None) -> ActionOutput:
        x = np.asarray(x, dtype=np.float64)
        if not np.all(np.isfinite(x)):
            raise ValueError("state contains NaN or infinity")
        out = self.forward_batch(x[None, :], training, rng)
        return _single_from_batch(out)

    def count_params(self):
        total = sum(p.data.size for p in self.parameters())
        return total, total


def _single_from_batch(out: BatchOutput) -> ActionOutput:
    def first(v):
        return ad.Value(v.data[0], requires_grad=False)

    return ActionOutput(
        mean=[first(m) for m in out.mean],
        std=[first(s) for s in out.std],
        action=[first(a) for a in out.action],
        raw=[first(r) for r in out.raw],
        log_prob=first(out.log_prob),
        leaf_index=-1,
    )
