"""Off-policy soft actor-critic: twin critics, polyak-averaged targets,
uniform replay, optional entropy-coefficient auto-tuning.

The trainer drives any actor exposing ``forward_batch`` / ``act`` /
``parameters`` (tree policies, soft trees, MLPs); only the actor forward
differs between them.
"""

from __future__ import annotations

import csv
import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .nn import Mlp

BUFFER_CAPACITY = 1_000_000


@dataclass
class Transition:
    state: np.ndarray
    action: np.ndarray  # squashed, as executed
    raw_action: np.ndarray  # pre-squash
    reward: float
    next_state: np.ndarray
    done: bool


class ReplayBuffer:
    """Fixed-capacity FIFO ring; sampling is uniform without replacement."""

    def __init__(self, obs_dim: int, action_dim: int, capacity: int = BUFFER_CAPACITY):
        self.capacity = capacity
        self.states = np.zeros((capacity, obs_dim))
        self.actions = np.zeros((capacity, action_dim))
        self.raw_actions = np.zeros((capacity, action_dim))
        self.rewards = np.zeros(capacity)
        self.next_states = np.zeros((capacity, obs_dim))
        self.dones = np.zeros(capacity)
        self.ptr = 0
        self.size = 0

    def __len__(self):
        return self.size

    def add(self, state, action, raw_action, reward, next_state, done):
        if not math.isfinite(reward):
            raise ValueError("reward must be finite")
        i = self.ptr
        self.states[i] = state
        self.actions[i] = action
        self.raw_actions[i] = raw_action
        self.rewards[i] = reward
        self.next_states[i] = next_state
        self.dones[i] = float(done)
        self.ptr = (self.ptr + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def add_transition(self, t: Transition):
        self.add(t.state, t.action, t.raw_action, t.reward, t.next_state, t.done)

    def sample(self, batch_size: int, rng: np.random.Generator) -> dict:
        if self.size == 0:
            raise ValueError("cannot sample from an empty replay buffer")
        if batch_size > self.size:
            raise ValueError(f"batch size {batch_size} exceeds buffer size {self.size}")
        idx = rng.choice(self.size, size=batch_size, replace=False)
        return {
            "state": self.states[idx],
            "action": self.actions[idx],
            "raw_action": self.raw_actions[idx],
            "reward": self.rewards[idx],
            "next_state": self.next_states[idx],
            "done": self.dones[idx],
        }


class Adam:
    """Adaptive moment estimation with the conventional decay constants."""

    def __init__(self, params, lr: float, betas=(0.9, 0.999), eps: float = 1e-8):
        self.params = list(params)
        self.lr = lr
        self.b1, self.b2 = betas
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def step(self):
        self.t += 1
        c1 = 1.0 - self.b1 ** self.t
        c2 = 1.0 - self.b2 ** self.t
        for i, p in enumerate(self.params):
            g = p.grad
            if g is None:
                continue
            self.m[i] = self.b1 * self.m[i] + (1.0 - self.b1) * g
            self.v[i] = self.b2 * self.v[i] + (1.0 - self.b2) * g * g
            p.data = p.data - self.lr * (self.m[i] / c1) / (np.sqrt(self.v[i] / c2) + self.eps)
        ad.zero_grad(self.params)


class CriticPair:
    """Twin Q networks with matching polyak-averaged target copies."""

    def __init__(self, in_dim: int, hidden, rng: np.random.Generator):
        self.q1 = Mlp(in_dim, list(hidden), rng)
        self.q2 = Mlp(in_dim, list(hidden), rng)
        self.t1 = Mlp(in_dim, list(hidden), rng)
        self.t2 = Mlp(in_dim, list(hidden), rng)
        self.t1.copy_from(self.q1)
        self.t2.copy_from(self.q2)
        for p in self.target_parameters():
            p.requires_grad = False

    def parameters(self):
        return self.q1.parameters() + self.q2.parameters()

    def target_parameters(self):
        return self.t1.parameters() + self.t2.parameters()

    def soft_update(self, tau: float):
        """target <- tau * online + (1 - tau) * target, elementwise."""
        for o, t in zip(self.parameters(), self.target_parameters()):
            t.data = tau * o.data + (1.0 - tau) * t.data


@dataclass
class TrainerConfig:
    actor_lr: float = 3e-4
    critic_lr: float = 3e-4
    batch_size: int = 256
    gamma: float = 0.99
    tau: float = 0.01
    ent_mode: str = "auto"  # "auto" or "fixed"
    ent_coef: float = 0.2  # used when ent_mode == "fixed"
    ent_lr: float | None = None
    target_entropy: float | None = None  # default: -|A|
    total_steps: int = 100_000
    warmup_steps: int = 1000
    update_interval: int = 1
    seed: int = 0
    critic_hidden: tuple = (256, 256)
    buffer_capacity: int = BUFFER_CAPACITY
    l1_coeff: float = 0.0
    eval_interval: int = 0  # 0 disables periodic evaluation
    eval_episodes: int = 10
    early_stop_return: float | None = None
    checkpoint_interval: int = 0  # 0: only initial and final

    def __post_init__(self):
        if self.actor_lr <= 0 or self.critic_lr <= 0:
            raise ValueError("learning rates must be positive")
        if not 0.0 < self.tau <= 1.0:
            raise ValueError("tau must be in (0, 1]")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must be in [0, 1]")
        if self.ent_mode not in ("auto", "fixed"):
            raise ValueError(f"unknown entropy mode {self.ent_mode!r}")


class TrainingDiverged(RuntimeError):
    pass


@dataclass
class TrainResult:
    actor: object
    steps: int
    episodes: int
    metrics_path: Path | None
    eval_path: Path | None
    checkpoint_paths: list
    final_eval: float | None
    early_stopped: bool
    wallclock_s: float
    metrics_rows: list = field(default_factory=list)


METRIC_COLUMNS = [
    "step",
    "episode",
    "episode_return",
    "critic1_loss",
    "critic2_loss",
    "actor_loss",
    "entropy_coef",
    "wallclock_s",
]


class SacTrainer:
    def __init__(self, env, actor, config: TrainerConfig, out_dir=None, eval_env=None):
        if env.spec.obs_dim != actor.m or env.spec.action_dim != actor.action_dim:
            raise ValueError(
                f"env dims ({env.spec.obs_dim}, {env.spec.action_dim}) do not match "
                f"actor dims ({actor.m}, {actor.action_dim})"
            )
        self.env = env
        self.eval_env = eval_env
        self.actor = actor
        self.cfg = config
        self.out_dir = Path(out_dir) if out_dir is not None else None
        if self.out_dir is not None:
            self.out_dir.mkdir(parents=True, exist_ok=True)

        ss = np.random.SeedSequence(config.seed)
        s_critic, s_explore, s_buffer, s_env, s_eval = ss.spawn(5)
        self.rng_explore = np.random.default_rng(s_explore)
        self.rng_buffer = np.random.default_rng(s_buffer)
        self.rng_env = np.random.default_rng(s_env)
        self.eval_seed = int(np.random.default_rng(s_eval).integers(2**31))

        self.buffer = ReplayBuffer(env.spec.obs_dim, env.spec.action_dim,
                                   config.buffer_capacity)
        self.critics = CriticPair(env.spec.obs_dim + env.spec.action_dim,
                                  config.critic_hidden,
                                  np.random.default_rng(s_critic))
        self.opt_actor = Adam(actor.parameters(), config.actor_lr)
        self.opt_critic = Adam(self.critics.parameters(), config.critic_lr)

        self.target_entropy = (
            config.target_entropy
            if config.target_entropy is not None
            else -float(env.spec.action_dim)
        )
        self.log_alpha = 0.0
        self._alpha_m = 0.0
        self._alpha_v = 0.0
        self._alpha_t = 0

    # -- core updates --------------------------------------------------------

    @property
    def alpha(self) -> float:
        if self.cfg.ent_mode == "fixed":
            return self.cfg.ent_coef
        return math.exp(self.log_alpha)

    def critic_update(self, batch) -> tuple[float, float]:
        """Fit both critics to r + gamma (1-d) (min Q' - alpha log pi')."""
        # target side: no gradients needed
        nxt = self.actor.forward_batch(batch["next_state"], training=True,
                                       rng=self.rng_explore)
        a_next = np.stack([a.data for a in nxt.action], axis=1)
        q_in = np.concatenate([batch["next_state"], a_next], axis=1)
        q1t = self.critics.t1(ad.const(q_in)).data
        q2t = self.critics.t2(ad.const(q_in)).data
        q_min = np.minimum(q1t, q2t)
        y = batch["reward"] + self.cfg.gamma * (1.0 - batch["done"]) * (
            q_min - self.alpha * nxt.log_prob.data
        )

        with ad.Tape():
            q_in = ad.concat_cols(ad.const(batch["state"]), ad.const(batch["action"]))
            loss1 = ad.reduce_mean(ad.squared_error(self.critics.q1(q_in), ad.const(y)))
            loss2 = ad.reduce_mean(ad.squared_error(self.critics.q2(q_in), ad.const(y)))
            ad.backward(ad.add(loss1, loss2))
        l1, l2 = float(loss1.data), float(loss2.data)
        self._check_finite("critic", l1 + l2)
        self.opt_critic.step()
        return l1, l2

    def actor_update(self, batch) -> float:
        """Minimize E[alpha log pi - min Q] with reparameterized actions."""
        alpha = self.alpha
        critic_params = self.critics.parameters()
        for p in critic_params:
            p.requires_grad = False
        try:
            with ad.Tape():
                out = self.actor.forward_batch(batch["state"], training=True,
                                               rng=self.rng_explore)
                q_in = ad.concat_cols(ad.const(batch["state"]), *out.action)
                q_min = ad.minimum(self.critics.q1(q_in), self.critics.q2(q_in))
                loss = ad.reduce_mean(ad.sub(ad.scale(out.log_prob, alpha), q_min))
                if self.cfg.l1_coeff > 0.0 and hasattr(self.actor, "l1_penalty"):
                    loss = ad.add(loss, self.actor.l1_penalty(self.cfg.l1_coeff))
                ad.backward(loss)
        finally:
            for p in critic_params:
                p.requires_grad = True
        actor_loss = float(loss.data)
        self._check_finite("actor", actor_loss)
        self.opt_actor.step()

        if self.cfg.ent_mode == "auto":
            # d/d(log alpha) of  -log_alpha * mean(log pi + target_entropy)
            g = -float(np.mean(out.log_prob.data + self.target_entropy))
            self._alpha_t += 1
            lr = self.cfg.ent_lr if self.cfg.ent_lr is not None else self.cfg.critic_lr
            self._alpha_m = 0.9 * self._alpha_m + 0.1 * g
            self._alpha_v = 0.999 * self._alpha_v + 0.001 * g * g
            mhat = self._alpha_m / (1.0 - 0.9 ** self._alpha_t)
            vhat = self._alpha_v / (1.0 - 0.999 ** self._alpha_t)
            self.log_alpha -= lr * mhat / (math.sqrt(vhat) + 1e-8)
        return actor_loss

    def soft_update(self, tau: float | None = None):
        self.critics.soft_update(self.cfg.tau if tau is None else tau)

    def _check_finite(self, which: str, value: float):
        if math.isfinite(value):
            return
        dump = None
        if self.out_dir is not None:
            dump = self.out_dir / "diverged.json"
            info = {
                "loss": which,
                "value": repr(value),
                "alpha": self.alpha,
                "buffer_size": len(self.buffer),
            }
            dump.write_text(json.dumps(info, indent=2))
        raise TrainingDiverged(f"non-finite {which} loss{f' (dump: {dump})' if dump else ''}")

    # -- rollout loop ---------------------------------------------------------

    def _warmup_action(self):
        low, high = self.env.spec.action_low, self.env.spec.action_high
        a = self.rng_explore.uniform(low, high)
        ratio = np.clip((a - self.actor.bounds.center) / self.actor.bounds.half,
                        -1.0 + 1e-12, 1.0 - 1e-12)
        return a, np.arctanh(ratio)

    def evaluate(self, episodes: int | None = None) -> float:
        from .rollout import evaluate, policy_fn

        env = self.eval_env if self.eval_env is not None else self.env
        n = episodes if episodes is not None else self.cfg.eval_episodes
        rng = np.random.default_rng(self.eval_seed)
        returns = evaluate(env, policy_fn(self.actor, rng=rng), n, self.eval_seed)
        return float(returns.mean())

    def train(self) -> TrainResult:
        cfg = self.cfg
        t0 = time.perf_counter()
        rows = []
        checkpoints = []
        c1 = c2 = a_loss = 0.0
        episode = 0
        episode_return = 0.0
        early_stopped = False
        final_eval = None

        if self.out_dir is not None:
            checkpoints.append(self._save_checkpoint(0))

        obs = self.env.reset(self._next_env_seed())
        step = 0
        while step < cfg.total_steps:
            step += 1
            if step <= cfg.warmup_steps:
                action, raw = self._warmup_action()
            else:
                out = self.actor.act(obs, training=True, rng=self.rng_explore)
                action, raw = out.action_array(), out.raw_array()
            nobs, reward, done = self.env.step(action)
            self.buffer.add(obs, action, raw, reward, nobs, done)
            episode_return += reward
            obs = nobs

            if done:
                episode += 1
                rows.append(
                    [step, episode, episode_return, c1, c2, a_loss, self.alpha,
                     round(time.perf_counter() - t0, 3)]
                )
                episode_return = 0.0
                obs = self.env.reset(self._next_env_seed())

            if (
                step > cfg.warmup_steps
                and len(self.buffer) >= cfg.batch_size
                and step % cfg.update_interval == 0
            ):
                batch = self.buffer.sample(cfg.batch_size, self.rng_buffer)
                c1, c2 = self.critic_update(batch)
                a_loss = self.actor_update(batch)
                self.soft_update()

            if cfg.checkpoint_interval and step % cfg.checkpoint_interval == 0:
                if self.out_dir is not None:
                    checkpoints.append(self._save_checkpoint(step))

            if cfg.eval_interval and step % cfg.eval_interval == 0:
                final_eval = self.evaluate()
                if (
                    cfg.early_stop_return is not None
                    and final_eval >= cfg.early_stop_return
                ):
                    early_stopped = True
                    break

        metrics_path = eval_path = None
        if self.out_dir is not None:
            checkpoints.append(self._save_checkpoint(step))
            metrics_path = self.out_dir / "metrics.csv"
            with open(metrics_path, "w", newline="") as f:
                writer = csv.writer(f)
                writer.writerow(METRIC_COLUMNS)
                writer.writerows(rows)
        return TrainResult(
            actor=self.actor,
            steps=step,
            episodes=episode,
            metrics_path=metrics_path,
            eval_path=eval_path,
            checkpoint_paths=checkpoints,
            final_eval=final_eval,
            early_stopped=early_stopped,
            wallclock_s=time.perf_counter() - t0,
            metrics_rows=rows,
        )

    def _next_env_seed(self) -> int:
        return int(self.rng_env.integers(2**31))

    def _save_checkpoint(self, step: int):
        from .checkpoint import save_checkpoint

        path = self.out_dir / f"ckpt_{step}.json"
        save_checkpoint(self.actor, path, env_spec=self.env.spec)
        return path


def train(env, actor, config: TrainerConfig, out_dir=None, eval_env=None) -> TrainResult:
    """Train ``actor`` on ``env`` and return the artifacts."""
    return SacTrainer(env, actor, config, out_dir=out_dir, eval_env=eval_env).train()
