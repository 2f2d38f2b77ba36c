"""Run orchestration shared by the CLI and the acceptance suite."""

from __future__ import annotations

import dataclasses
import json
from pathlib import Path

import numpy as np

from .baselines import MlpActor
from .checkpoint import load_crisp, save_checkpoint
from .config import RunConfig, build_model
from .envs import make_env
from .export import format_dot, format_text
from .rollout import evaluate, mean_stderr, policy_fn
from .sac import SacTrainer
from .tree import count_params, crisp_predict_batch


def run_single(cfg: RunConfig, seed: int, out_root) -> dict:
    """Train one seed; writes metrics, checkpoints, exports, and a manifest.

    Returns the manifest dictionary (paths plus summary numbers).
    """
    out_root = Path(out_root)
    run_dir = out_root / f"seed_{seed}"
    env = make_env(cfg.env)
    eval_env = make_env(cfg.env)
    model = build_model(cfg, env.spec, seed)
    tcfg = dataclasses.replace(cfg.trainer, seed=seed)
    trainer = SacTrainer(env, model, tcfg, out_dir=run_dir, eval_env=eval_env)
    result = trainer.train()

    artifacts = [str(result.metrics_path)] + [str(p) for p in result.checkpoint_paths]
    if not isinstance(model, MlpActor):
        tree = model.to_crisp()
        text_path = run_dir / "tree.txt"
        dot_path = run_dir / "tree.dot"
        text_path.write_text(format_text(tree, env.spec.feature_names))
        dot_path.write_text(format_dot(tree, env.spec.feature_names))
        artifacts += [str(text_path), str(dot_path)]

    rng = np.random.default_rng(1_000_003 + seed)
    returns = evaluate(eval_env, policy_fn(model, rng=rng),
                       tcfg.eval_episodes, seed=900_000 + seed)
    mean, stderr = mean_stderr(returns)

    total, active = _param_counts(model)
    manifest = {
        "seed": seed,
        "env": cfg.env,
        "kind": cfg.kind,
        "steps": result.steps,
        "episodes": result.episodes,
        "early_stopped": result.early_stopped,
        "eval_mean": mean,
        "eval_stderr": stderr,
        "eval_returns": returns.tolist(),
        "params_total": total,
        "params_active": active,
        "artifacts": artifacts,
        "wallclock_s": result.wallclock_s,
    }
    (run_dir / "manifest.json").write_text(json.dumps(manifest, indent=2))
    manifest["run_dir"] = str(run_dir)
    manifest["final_checkpoint"] = str(result.checkpoint_paths[-1])
    manifest["model"] = model
    return manifest


def _param_counts(model):
    if isinstance(model, MlpActor):
        return model.count_params()
    if hasattr(model, "leaf_kind"):
        return model.count_params()
    return count_params(model)


def run_config(cfg: RunConfig, out_root) -> list:
    """One run per seed; writes the top-level manifest."""
    out_root = Path(out_root)
    out_root.mkdir(parents=True, exist_ok=True)
    manifests = [run_single(cfg, seed, out_root) for seed in cfg.seeds]
    top = {
        "config": cfg.raw,
        "runs": [
            {k: v for k, v in m.items() if k != "model"} for m in manifests
        ],
    }
    (out_root / "manifest.json").write_text(json.dumps(top, indent=2))
    return manifests


def consistency_check(checkpoint_path, n_states: int = 10_000, seed: int = 0) -> float:
    """Max |deterministic act - crisp prediction| over random normalized
    states plus states visited by the deterministic policy."""
    from .checkpoint import load_checkpoint

    model, meta = load_checkpoint(checkpoint_path)
    if isinstance(model, MlpActor):
        raise ValueError("consistency check applies to tree checkpoints")
    tree, _ = load_crisp(checkpoint_path)
    rng = np.random.default_rng(seed)
    act_rng = np.random.default_rng(seed + 1)
    X = rng.uniform(-1.0, 1.0, size=(n_states, model.m))
    env_meta = meta.get("env") or {}
    if env_meta.get("name"):
        env = make_env(env_meta["name"])
        obs = env.reset(seed)
        visited = []
        for _ in range(min(1000, n_states)):
            a = model.act(obs, training=False, rng=act_rng).action_array()
            obs, _, done = env.step(a)
            visited.append(obs)
            if done:
                obs = env.reset(seed + 1)
        X = np.vstack([X, np.asarray(visited)])
    crisp = crisp_predict_batch(tree, X)
    worst = 0.0
    for i in range(X.shape[0]):
        a = model.act(X[i], training=False, rng=act_rng).action_array()
        worst = max(worst, float(np.max(np.abs(a - crisp[i]))))
    return worst
