"""Shared machinery for the acceptance suite.

Training runs are deterministic per config+seed, so completed runs are
cached on disk keyed by a hash of the full config document; re-running the
suite reuses finished artifacts instead of retraining. Delete
``.acceptance_cache/`` (or set CRISPTREE_ACCEPT_CACHE=0) for a cold run.
"""

from __future__ import annotations

import hashlib
import json
import os
from pathlib import Path

import numpy as np

from crisptree.config import parse_config
from crisptree.runs import run_config

CACHE_ROOT = Path(__file__).resolve().parent.parent / ".acceptance_cache"


def _cache_enabled() -> bool:
    return os.environ.get("CRISPTREE_ACCEPT_CACHE", "1") != "0"


def cached_run(doc: dict) -> list:
    """Train all seeds of ``doc`` (or reuse the cached artifacts).

    Returns the per-seed manifest list with loaded models attached.
    """
    key = hashlib.sha1(json.dumps(doc, sort_keys=True).encode()).hexdigest()[:16]
    root = CACHE_ROOT / key
    marker = root / "complete.json"
    if _cache_enabled() and marker.exists():
        manifests = json.loads(marker.read_text())
        return [_attach_model(m) for m in manifests]

    doc = dict(doc, out_dir=str(root))
    cfg = parse_config(doc)
    manifests = run_config(cfg, root)
    slim = [{k: v for k, v in m.items() if k != "model"} for m in manifests]
    marker.write_text(json.dumps(slim))
    return manifests


def _attach_model(manifest: dict) -> dict:
    from crisptree.checkpoint import load_checkpoint

    model, _ = load_checkpoint(manifest["final_checkpoint"])
    out = dict(manifest)
    out["model"] = model
    return out


def crisp_eval(model, env_name: str, episodes: int, seed: int) -> float:
    """Mean return of the exported crisp tree's policy."""
    from crisptree.envs import make_env
    from crisptree.rollout import crisp_fn, evaluate

    env = make_env(env_name)
    tree = model.to_crisp()
    return float(evaluate(env, crisp_fn(tree), episodes, seed).mean())


def deterministic_eval(model, env_name: str, episodes: int, seed: int,
                       rng_seed: int | None = None) -> float:
    """Mean return of the model's deterministic policy (routing noise still
    applies to gumbel-variant models)."""
    from crisptree.envs import make_env
    from crisptree.rollout import evaluate, policy_fn

    env = make_env(env_name)
    rng = np.random.default_rng(seed if rng_seed is None else rng_seed)
    return float(evaluate(env, policy_fn(model, rng=rng), episodes, seed).mean())


def spread_tree_params(tp, rng):
    """Randomize a tree policy's parameters into a nondegenerate spread
    (fresh inits have near-zero biases, which makes consistency checks too
    easy)."""
    for node in tp.nodes:
        node.w.data[:] = rng.normal(size=tp.m)
        node.b.data = np.asarray(rng.normal() * 0.5)
        node.alpha.data = np.asarray(rng.choice([-1.0, 1.0]) * rng.uniform(0.5, 2.0))
    for leaf in tp.leaves:
        for d in range(tp.action_dim):
            leaf.beta[d].data[:] = rng.normal(size=tp.m)
            leaf.theta[d].data[:] = rng.normal(size=tp.m)
            leaf.phi[d].data[:] = rng.normal(size=tp.m) * 0.3
            leaf.log_gamma[d].data = np.asarray(rng.normal() * 0.2)
            leaf.static[d].data = np.asarray(rng.normal())
    return tp
