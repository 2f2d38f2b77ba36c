"""Online tree growth: keep a one-level-deeper imitation of the live policy
and swap it in when its visit-weighted leaf entropy drops below the live
policy's by a margin.

The deeper candidate copies the live tree's upper levels; each old leaf
becomes a decision node (randomly initialized split) whose two children
start from the old leaf's controller, so the candidate is behaviorally
identical at the moment of deepening and only diverges as it learns.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .sac import Adam, SacTrainer, TrainerConfig
from .tree import TreePolicy

MIN_VISITS = 5
_GAUSS_CONST = 0.5 * math.log(2.0 * math.pi * math.e)


@dataclass
class DeepenConfig:
    epsilon: float = 0.0
    epochs: int = 10
    episodes_per_epoch: int = 4
    sac_updates_per_epoch: int = 200
    imitation_steps_per_epoch: int = 200
    imitation_lr: float = 1e-2
    imitation_batch: int = 256
    perturb: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.epsilon < 0.0 and not math.isinf(self.epsilon):
            raise ValueError("entropy margin must be >= 0")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")


@dataclass
class LeafEntropyVector:
    """Per-leaf differential entropy estimates plus visit counts; leaves
    with too few visits are flagged unvisited."""

    entropy: np.ndarray  # nan where unvisited
    visits: np.ndarray

    @property
    def visited(self) -> np.ndarray:
        return self.visits >= MIN_VISITS

    def aggregate(self) -> float:
        """Visit-weighted mean entropy over visited leaves."""
        mask = self.visited
        if not mask.any():
            raise ValueError("no leaf received enough visits to estimate entropy")
        w = self.visits[mask].astype(np.float64)
        return float(np.sum(w * self.entropy[mask]) / w.sum())


def init_deeper(model: TreePolicy, perturb: float = 0.0, seed: int | None = None) -> TreePolicy:
    """Depth+1 copy: upper levels share the parent's parameters, each old
    leaf becomes a node whose children inherit that leaf's controller."""
    deep = TreePolicy(
        depth=model.depth + 1,
        m=model.m,
        action_dim=model.action_dim,
        e=model.e,
        seed=model.seed + 1 if seed is None else seed,
        variant=model.variant,
        gumbel_tau=model.gumbel_tau,
        action_low=model.bounds.low,
        action_high=model.bounds.high,
    )
    rng = np.random.default_rng(deep.seed)
    for i, node in enumerate(model.nodes):  # heap slots coincide on top levels
        deep.nodes[i].w.data = node.w.data.copy()
        deep.nodes[i].b.data = node.b.data.copy()
        deep.nodes[i].alpha.data = node.alpha.data.copy()
    for j, leaf in enumerate(model.leaves):
        for child in (2 * j, 2 * j + 1):
            tgt = deep.leaves[child]
            for d in range(model.action_dim):
                tgt.beta[d].data = leaf.beta[d].data + perturb * rng.normal(size=model.m)
                tgt.theta[d].data = leaf.theta[d].data + perturb * rng.normal(size=model.m)
                tgt.phi[d].data = leaf.phi[d].data + perturb * rng.normal(size=model.m)
                tgt.log_gamma[d].data = leaf.log_gamma[d].data.copy()
                tgt.static[d].data = leaf.static[d].data + perturb * rng.normal()
    return deep


def estimate_leaf_entropies(model: TreePolicy, states: np.ndarray) -> LeafEntropyVector:
    """Route visited states; per leaf, total predictive entropy per action
    dim is 0.5 ln(2 pi e (var of emitted means + gamma^2)), summed over dims."""
    states = np.asarray(states, dtype=np.float64)
    if states.size == 0:
        raise ValueError("need at least one state")
    out = model.forward_batch(states, training=False)
    leaf_idx = out.leaf_index
    means = np.stack([m.data for m in out.mean], axis=1)  # (B, adim)

    n_leaves = model.n_leaves
    entropy = np.full(n_leaves, np.nan)
    visits = np.zeros(n_leaves, dtype=np.int64)
    for li in range(n_leaves):
        mask = leaf_idx == li
        visits[li] = int(mask.sum())
        if visits[li] < MIN_VISITS:
            continue
        total = 0.0
        for d in range(model.action_dim):
            gamma = float(np.clip(math.exp(float(model.leaves[li].log_gamma[d].data)),
                                  1e-6, 10.0))
            var = float(np.var(means[mask, d])) + gamma * gamma
            total += _GAUSS_CONST + 0.5 * math.log(var)
        entropy[li] = total
    vec = LeafEntropyVector(entropy=entropy, visits=visits)
    if not vec.visited.any():
        raise ValueError("no leaf received enough visits to estimate entropy")
    return vec


def behavioral_deviation(a: TreePolicy, b: TreePolicy, states: np.ndarray) -> float:
    """Max absolute deterministic-action difference over the given states."""
    out_a = a.forward_batch(states, training=False).action_matrix()
    out_b = b.forward_batch(states, training=False).action_matrix()
    return float(np.max(np.abs(out_a - out_b)))


def _imitation_update(deep: TreePolicy, opt: Adam, states, raw_actions, rng, batch, steps):
    """Behavior cloning: maximize the deeper tree's Gaussian log-likelihood
    of the live policy's pre-squash actions."""
    n = states.shape[0]
    last = 0.0
    for _ in range(steps):
        idx = rng.choice(n, size=min(batch, n), replace=False)
        with ad.Tape():
            lp = deep.log_prob_of_raw(states[idx], raw_actions[idx])
            loss = ad.scale(ad.reduce_mean(lp), -1.0)
            ad.backward(loss)
        opt.step()
        last = float(loss.data)
    return last


@dataclass
class GrowthEvent:
    epoch: int
    depth: int
    entropy_live: float
    entropy_deep: float
    swapped: bool
    trigger_leaves: list = field(default_factory=list)


@dataclass
class DeepenResult:
    model: TreePolicy
    log: list
    swap_checks: list  # behavioral deviation measured at each swap


def deepen_loop(model: TreePolicy, env, config: DeepenConfig,
                trainer_config: TrainerConfig | None = None) -> DeepenResult:
    """Alternate policy improvement on the live tree with imitation on the
    deeper candidate; swap when the candidate's aggregate leaf entropy is
    lower by more than the margin."""
    tcfg = trainer_config or TrainerConfig(
        batch_size=config.imitation_batch, warmup_steps=0, total_steps=0,
        seed=config.seed,
    )
    trainer = SacTrainer(env, model, tcfg)
    deep = init_deeper(model, perturb=config.perturb)
    opt_deep = Adam(
        list(deep.parameters()), config.imitation_lr
    )
    rng = np.random.default_rng(np.random.SeedSequence(config.seed).spawn(1)[0])

    log = []
    swap_checks = []
    held_out = np.asarray(
        [env.reset(10_000 + i) for i in range(1000)], dtype=np.float64
    ).reshape(1000, env.spec.obs_dim)

    for epoch in range(config.epochs):
        # 1. collect rollouts with the live policy
        states, raws = [], []
        for _ in range(config.episodes_per_epoch):
            obs = env.reset(trainer._next_env_seed())
            done = False
            while not done:
                out = model.act(obs, training=True, rng=trainer.rng_explore)
                action, raw = out.action_array(), out.raw_array()
                nobs, reward, done = env.step(action)
                trainer.buffer.add(obs, action, raw, reward, nobs, done)
                states.append(obs)
                raws.append(raw)
                obs = nobs
        tau_states = np.asarray(states)
        tau_raws = np.asarray(raws)

        # 2. improve the live policy; clone it into the deeper candidate
        if len(trainer.buffer) >= tcfg.batch_size:
            for _ in range(config.sac_updates_per_epoch):
                batch = trainer.buffer.sample(tcfg.batch_size, trainer.rng_buffer)
                trainer.critic_update(batch)
                trainer.actor_update(batch)
                trainer.soft_update()
        _imitation_update(deep, opt_deep, tau_states, tau_raws, rng,
                          config.imitation_batch, config.imitation_steps_per_epoch)

        # 3. entropy comparison on the freshly collected states
        try:
            h_live = estimate_leaf_entropies(model, tau_states)
            h_deep = estimate_leaf_entropies(deep, tau_states)
        except ValueError:
            log.append(GrowthEvent(epoch, model.depth, float("nan"), float("nan"), False))
            continue
        agg_live, agg_deep = h_live.aggregate(), h_deep.aggregate()

        triggers = []
        for j in range(model.n_leaves):
            kids = (2 * j, 2 * j + 1)
            if not h_live.visited[j]:
                continue
            kid_vis = h_deep.visits[list(kids)]
            kid_ent = h_deep.entropy[list(kids)]
            ok = kid_vis >= MIN_VISITS
            if not ok.any():
                continue
            combined = float(np.sum(kid_vis[ok] * kid_ent[ok]) / kid_vis[ok].sum())
            if combined + config.epsilon < h_live.entropy[j]:
                triggers.append(j)

        swapped = agg_deep + config.epsilon < agg_live
        log.append(GrowthEvent(epoch, model.depth, agg_live, agg_deep, swapped, triggers))
        if swapped:
            model = deep  # the swap is assignment: post-swap policy == candidate
            trainer.actor = model
            trainer.opt_actor = Adam(list(model.parameters()), tcfg.actor_lr)
            deep = init_deeper(model, perturb=config.perturb)
            opt_deep = Adam(list(deep.parameters()), config.imitation_lr)
            swap_checks.append(behavioral_deviation(deep, model, held_out))

    return DeepenResult(model=model, log=log, swap_checks=swap_checks)


GROWTH_LOG_COLUMNS = ["epoch", "depth", "H", "H_deep", "swapped"]


def growth_log_rows(result: DeepenResult) -> list:
    return [
        [e.epoch, e.depth, e.entropy_live, e.entropy_deep, int(e.swapped)]
        for e in result.log
    ]
