"""Checkpoint serialization: one JSON document per model.

Layout:
    meta:   {kind, depth, m, action_dim, e, seed, variant, env {...}}
    nodes:  [{w, b, alpha} ...]                       (tree models)
    leaves: [{beta, theta, phi, log_gamma[, static]} ...]
    crisp:  {nodes: [{k, threshold, dir} ...],
             leaves: [[[{idx, coef} ..., bias, std] per dim] per leaf]}
    layers/heads                                       (MLP models)

The crisp block is derived at save time and is the authoritative artifact
for deployment inference.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .actions import ActionBounds
from .baselines import LINEAR, STATIC, MlpActor, SoftTreePolicy
from .tree import CrispLeafDim, CrispPredicate, CrispTree, TreePolicy

KIND_TREE = "icct"
KIND_SOFT_STATIC = "cddt"
KIND_SOFT_LINEAR = "cddt_controllers"
KIND_MLP = "mlp"


def _env_meta(env_spec) -> dict:
    if env_spec is None:
        return {}
    return {
        "name": env_spec.name,
        "obs_dim": env_spec.obs_dim,
        "action_dim": env_spec.action_dim,
        "action_low": np.asarray(env_spec.action_low).tolist(),
        "action_high": np.asarray(env_spec.action_high).tolist(),
        "feature_names": list(env_spec.feature_names),
        "normalization": env_spec.normalization,
        "horizon": env_spec.horizon,
    }


def _crisp_block(tree: CrispTree) -> dict:
    nodes = [
        {"k": p.feature, "threshold": p.threshold, "dir": ">" if p.greater else "<"}
        for p in tree.nodes
    ]
    leaves = []
    for dims in tree.leaves:
        per_leaf = []
        for ld in dims:
            entry = [{"idx": i, "coef": c} for i, c in ld.pairs]
            entry.append(ld.bias)
            entry.append(ld.std)
            per_leaf.append(entry)
        leaves.append(per_leaf)
    return {"nodes": nodes, "leaves": leaves}


def crisp_from_block(block: dict, meta: dict) -> CrispTree:
    nodes = [
        CrispPredicate(feature=n["k"], threshold=n["threshold"], greater=n["dir"] == ">")
        for n in block["nodes"]
    ]
    leaves = []
    for per_leaf in block["leaves"]:
        dims = []
        for entry in per_leaf:
            pairs = [(p["idx"], p["coef"]) for p in entry[:-2]]
            dims.append(CrispLeafDim(pairs=pairs, bias=entry[-2], std=entry[-1]))
        leaves.append(dims)
    bounds = ActionBounds(meta["action_low"], meta["action_high"])
    return CrispTree(depth=meta["depth"], m=meta["m"], action_dim=meta["action_dim"],
                     e=meta["e"], nodes=nodes, leaves=leaves, bounds=bounds)


def save_checkpoint(model, path, env_spec=None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if isinstance(model, TreePolicy):
        doc = _tree_doc(model)
    elif isinstance(model, SoftTreePolicy):
        doc = _soft_doc(model)
    elif isinstance(model, MlpActor):
        doc = _mlp_doc(model)
    else:
        raise TypeError(f"cannot checkpoint {type(model).__name__}")
    doc["meta"]["env"] = _env_meta(env_spec)
    path.write_text(json.dumps(doc))
    return path


def _tree_doc(model: TreePolicy) -> dict:
    meta = {
        "kind": KIND_TREE,
        "depth": model.depth,
        "m": model.m,
        "action_dim": model.action_dim,
        "e": model.e,
        "seed": model.seed,
        "variant": model.variant,
        "gumbel_tau": model.gumbel_tau,
        "action_low": model.bounds.low.tolist(),
        "action_high": model.bounds.high.tolist(),
    }
    nodes = [
        {"w": n.w.data.tolist(), "b": float(n.b.data), "alpha": float(n.alpha.data)}
        for n in model.nodes
    ]
    leaves = []
    for leaf in model.leaves:
        entry = {
            "beta": [b.data.tolist() for b in leaf.beta],
            "theta": [t.data.tolist() for t in leaf.theta],
            "phi": [p.data.tolist() for p in leaf.phi],
            "log_gamma": [float(g.data) for g in leaf.log_gamma],
        }
        if model.e == 0:
            entry["static"] = [float(s.data) for s in leaf.static]
        leaves.append(entry)
    return {
        "meta": meta,
        "nodes": nodes,
        "leaves": leaves,
        "crisp": _crisp_block(model.to_crisp()),
    }


def _soft_doc(model: SoftTreePolicy) -> dict:
    meta = {
        "kind": KIND_SOFT_STATIC if model.leaf_kind == STATIC else KIND_SOFT_LINEAR,
        "depth": model.depth,
        "m": model.m,
        "action_dim": model.action_dim,
        "e": model.e,
        "seed": model.seed,
        "leaf_kind": model.leaf_kind,
        "action_low": model.bounds.low.tolist(),
        "action_high": model.bounds.high.tolist(),
    }
    nodes = [
        {"w": w.data.tolist(), "b": float(b.data), "alpha": float(a.data)}
        for w, b, a in zip(model.node_w, model.node_b, model.node_alpha)
    ]
    leaves = []
    for li in range(model.n_leaves):
        leaves.append(
            {
                "beta": [b.data.tolist() for b in model.beta[li]],
                "phi": [p.data.tolist() for p in model.phi[li]],
                "static": [float(s.data) for s in model.static[li]],
                "log_gamma": [float(g.data) for g in model.log_gamma[li]],
            }
        )
    return {
        "meta": meta,
        "nodes": nodes,
        "leaves": leaves,
        "crisp": _crisp_block(model.to_crisp()),
    }


def _mlp_doc(model: MlpActor) -> dict:
    meta = {
        "kind": KIND_MLP,
        "m": model.m,
        "action_dim": model.action_dim,
        "hidden": model.hidden,
        "seed": model.seed,
        "action_low": model.bounds.low.tolist(),
        "action_high": model.bounds.high.tolist(),
    }
    layers = [
        {"W": l.W.data.tolist(), "b": l.b.data.tolist()} for l in model.trunk
    ]
    heads = {
        "mean": [{"w": h.w.data.tolist(), "b": float(h.b.data)} for h in model.mean_heads],
        "log_std": [{"w": h.w.data.tolist(), "b": float(h.b.data)} for h in model.log_std_heads],
    }
    return {"meta": meta, "layers": layers, "heads": heads}


def load_checkpoint(path):
    """Rebuild the model from a checkpoint; returns (model, meta)."""
    doc = json.loads(Path(path).read_text())
    meta = doc["meta"]
    kind = meta["kind"]
    low, high = meta["action_low"], meta["action_high"]
    if kind == KIND_TREE:
        model = TreePolicy(
            depth=meta["depth"], m=meta["m"], action_dim=meta["action_dim"],
            e=meta["e"], seed=meta["seed"], variant=meta["variant"],
            gumbel_tau=meta.get("gumbel_tau", 1.0), action_low=low, action_high=high,
        )
        for node, nd in zip(model.nodes, doc["nodes"]):
            node.w.data = np.array(nd["w"])
            node.b.data = np.asarray(nd["b"])
            node.alpha.data = np.asarray(nd["alpha"])
        for leaf, ld in zip(model.leaves, doc["leaves"]):
            for d in range(model.action_dim):
                leaf.beta[d].data = np.array(ld["beta"][d])
                leaf.theta[d].data = np.array(ld["theta"][d])
                leaf.phi[d].data = np.array(ld["phi"][d])
                leaf.log_gamma[d].data = np.asarray(ld["log_gamma"][d])
                if "static" in ld:
                    leaf.static[d].data = np.asarray(ld["static"][d])
        return model, meta
    if kind in (KIND_SOFT_STATIC, KIND_SOFT_LINEAR):
        model = SoftTreePolicy(
            depth=meta["depth"], m=meta["m"], action_dim=meta["action_dim"],
            leaf_kind=meta["leaf_kind"], seed=meta["seed"],
            action_low=low, action_high=high,
        )
        for i, nd in enumerate(doc["nodes"]):
            model.node_w[i].data = np.array(nd["w"])
            model.node_b[i].data = np.asarray(nd["b"])
            model.node_alpha[i].data = np.asarray(nd["alpha"])
        for li, ld in enumerate(doc["leaves"]):
            for d in range(model.action_dim):
                model.beta[li][d].data = np.array(ld["beta"][d])
                model.phi[li][d].data = np.array(ld["phi"][d])
                model.static[li][d].data = np.asarray(ld["static"][d])
                model.log_gamma[li][d].data = np.asarray(ld["log_gamma"][d])
        return model, meta
    if kind == KIND_MLP:
        model = MlpActor(
            m=meta["m"], action_dim=meta["action_dim"], hidden=meta["hidden"],
            seed=meta["seed"], action_low=low, action_high=high,
        )
        for layer, ld in zip(model.trunk, doc["layers"]):
            layer.W.data = np.array(ld["W"])
            layer.b.data = np.array(ld["b"])
        for h, hd in zip(model.mean_heads, doc["heads"]["mean"]):
            h.w.data = np.array(hd["w"])
            h.b.data = np.asarray(hd["b"])
        for h, hd in zip(model.log_std_heads, doc["heads"]["log_std"]):
            h.w.data = np.array(hd["w"])
            h.b.data = np.asarray(hd["b"])
        return model, meta
    raise ValueError(f"unknown checkpoint kind {kind!r}")


def load_crisp(path) -> tuple[CrispTree, dict]:
    """The exported crisp tree stored in a tree checkpoint."""
    doc = json.loads(Path(path).read_text())
    meta = doc["meta"]
    if "crisp" not in doc:
        raise ValueError("checkpoint has no crisp tree (MLP model?)")
    return crisp_from_block(doc["crisp"], meta), meta
