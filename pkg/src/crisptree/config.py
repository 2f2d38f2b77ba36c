"""Run configuration: JSON documents layered over per-environment defaults.

Each built-in environment carries a table of method defaults (learning
rate, batch size, tree size / hidden sizes); a run config names an
environment and a model kind and may override any trainer field.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from .baselines import LINEAR, STATIC, MlpActor, SoftTreePolicy
from .envs import ENV_NAMES, make_env
from .sac import TrainerConfig
from .tree import GUMBEL, STRAIGHT_THROUGH, TreePolicy

MODEL_KINDS = (
    "icct",
    "icct-static",
    "icct-L1",
    "cddt",
    "cddt-controllers",
    "mlp-l",
    "mlp-u",
    "mlp-max",
)


class ConfigError(ValueError):
    pass


# method key -> (learning rate, batch size, leaves-or-hidden)
_PENDULUM = {
    "icct-complete": (3e-4, 1024, 2),
    "icct-1": (6e-4, 1024, 8),
    "icct-2": (5e-4, 1024, 4),
    "icct-3": (5e-4, 1024, 2),
    "icct-static": (5e-4, 1024, 32),
    "icct-L1": (3e-4, 256, 4),
    "cddt": (3e-4, 1024, 2),
    "cddt-controllers": (3e-4, 1024, 2),
    "mlp-max": (3e-4, 1024, [256, 256]),
    "mlp-u": (3e-4, 1024, [8, 8]),
    "mlp-l": (3e-4, 1024, [6, 6]),
}
_LANE = {
    "icct-complete": (3e-4, 1024, 16),
    "icct-1": (3e-4, 1024, 16),
    "icct-2": (3e-4, 1024, 16),
    "icct-3": (3e-4, 1024, 16),
    "icct-static": (2e-4, 1024, 16),
    "icct-L1": (3e-4, 1024, 16),
    "cddt": (3e-4, 256, 16),
    "cddt-controllers": (3e-4, 512, 16),
    "mlp-max": (3e-4, 256, [256, 256]),
    "mlp-u": (3e-4, 256, [14, 14]),
    "mlp-l": (3e-4, 256, [6, 6]),
}
_RING = {
    "icct-complete": (5e-4, 1024, 16),
    "icct-1": (5e-4, 1024, 16),
    "icct-2": (5e-4, 1024, 16),
    "icct-3": (5e-4, 1024, 16),
    "icct-static": (5e-4, 1024, 16),
    "icct-L1": (5e-4, 1024, 16),
    "cddt": (5e-4, 1024, 16),
    "cddt-controllers": (5e-4, 1024, 16),
    "mlp-max": (3e-4, 1024, [256, 256]),
    "mlp-u": (3e-4, 1024, [12, 12]),
    "mlp-l": (3e-4, 1024, [3, 3]),
}
_PLATEAU = {key: (5e-4, 256, 2 if not key.startswith("mlp") else [16, 16])
            for key in ("icct-complete", "icct-1", "icct-2", "icct-3", "icct-static",
                        "icct-L1", "cddt", "cddt-controllers", "mlp-max", "mlp-u", "mlp-l")}

METHOD_DEFAULTS = {
    "pendulum": _PENDULUM,
    "lane": _LANE,
    "ring": _RING,
    "plateau4": _PLATEAU,
}

TOTAL_STEPS_DEFAULT = {"pendulum": 500_000, "lane": 500_000, "ring": 100_000,
                       "plateau4": 20_000}
DEFAULT_SEEDS = [0, 1, 2, 3, 4]
DEFAULT_L1_COEFF = 1e-3


@dataclass
class RunConfig:
    env: str
    kind: str
    leaves: int
    e: int | None  # None for non-tree kinds
    hidden: list | None  # MLP only
    gumbel: bool
    trainer: TrainerConfig
    seeds: list
    out_dir: str
    l1_coeff: float = 0.0
    raw: dict = field(default_factory=dict)

    @property
    def depth(self) -> int:
        return int(math.log2(self.leaves))


def _method_key(kind: str, e, m: int) -> str:
    if kind == "icct":
        if e is None or e >= m:
            return "icct-complete"
        if e in (1, 2, 3):
            return f"icct-{e}"
        return "icct-complete"
    if kind == "icct-static":
        return "icct-static"
    if kind == "icct-L1":
        return "icct-L1"
    return kind


def load_config(path) -> RunConfig:
    try:
        doc = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ConfigError(f"config: no such file {path!r}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config: invalid JSON ({exc})") from None
    return parse_config(doc)


def parse_config(doc: dict) -> RunConfig:
    env_name = doc.get("env", "")
    if env_name not in ENV_NAMES:
        raise ConfigError(f"env: unknown {env_name!r}")
    model = doc.get("model", {})
    kind = model.get("kind", "")
    if kind not in MODEL_KINDS:
        raise ConfigError(f"model.kind: unknown {kind!r}")

    env = make_env(env_name)
    m = env.spec.obs_dim

    e = model.get("e")
    if kind == "icct-static":
        e = 0
    elif kind == "icct-L1":
        e = m
    elif kind == "icct" and e is None:
        e = m
    if kind.startswith("icct") and not 0 <= e <= m:
        raise ConfigError(f"model.e: {e} out of range 0..{m}")

    key = _method_key(kind, e, m)
    lr, batch, size = METHOD_DEFAULTS[env_name][key]

    leaves = model.get("leaves", size if not kind.startswith("mlp") else 2)
    if kind.startswith("mlp"):
        hidden = model.get("hidden", size)
        leaves = 2
    else:
        hidden = None
        if leaves < 2 or leaves & (leaves - 1):
            raise ConfigError(f"model.leaves: {leaves} is not a power of two >= 2")

    tdoc = dict(doc.get("trainer", {}))
    tau = 0.005 if (env_name == "pendulum" and key == "icct-static") else 0.01
    l1_coeff = float(doc.get("l1_coeff", DEFAULT_L1_COEFF if kind == "icct-L1" else 0.0))
    trainer_kwargs = dict(
        actor_lr=lr,
        critic_lr=lr,
        batch_size=batch,
        gamma=0.99,
        tau=tau,
        total_steps=TOTAL_STEPS_DEFAULT[env_name],
        l1_coeff=l1_coeff,
    )
    trainer_kwargs.update(tdoc)
    try:
        trainer = TrainerConfig(**trainer_kwargs)
    except TypeError as exc:
        raise ConfigError(f"trainer: {exc}") from None
    except ValueError as exc:
        raise ConfigError(f"trainer: {exc}") from None

    seeds = doc.get("seeds", list(DEFAULT_SEEDS))
    if not isinstance(seeds, list) or not all(isinstance(s, int) for s in seeds):
        raise ConfigError("seeds: must be a list of integers")

    return RunConfig(
        env=env_name,
        kind=kind,
        leaves=int(leaves),
        e=e,
        hidden=hidden,
        gumbel=bool(doc.get("gumbel", False)),
        trainer=trainer,
        seeds=seeds,
        out_dir=doc.get("out_dir", "runs"),
        l1_coeff=l1_coeff,
        raw=doc,
    )


def build_model(cfg: RunConfig, env_spec, seed: int):
    low, high = env_spec.action_low, env_spec.action_high
    if cfg.kind.startswith("mlp"):
        return MlpActor(m=env_spec.obs_dim, action_dim=env_spec.action_dim,
                        hidden=cfg.hidden, seed=seed, action_low=low, action_high=high)
    if cfg.kind == "cddt":
        return SoftTreePolicy(depth=cfg.depth, m=env_spec.obs_dim,
                              action_dim=env_spec.action_dim, leaf_kind=STATIC,
                              seed=seed, action_low=low, action_high=high)
    if cfg.kind == "cddt-controllers":
        return SoftTreePolicy(depth=cfg.depth, m=env_spec.obs_dim,
                              action_dim=env_spec.action_dim, leaf_kind=LINEAR,
                              seed=seed, action_low=low, action_high=high)
    variant = GUMBEL if cfg.gumbel else STRAIGHT_THROUGH
    return TreePolicy(depth=cfg.depth, m=env_spec.obs_dim,
                      action_dim=env_spec.action_dim, e=cfg.e, seed=seed,
                      variant=variant, action_low=low, action_high=high)
