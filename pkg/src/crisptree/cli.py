"""Command-line entry point: train / eval / export / verify / deepen / sweep.

Exit codes: 0 success, 1 configuration error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, load_config, parse_config


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return 2


def _build_parser():
    parser = argparse.ArgumentParser(prog="crisptree")
    sub = parser.add_subparsers(required=True)

    p = sub.add_parser("train", help="train one model per seed")
    p.add_argument("--config", required=True)
    p.add_argument("--out", help="output directory (overrides config out_dir)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--episodes", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="write the summary JSON here")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("export", help="render a checkpoint's crisp tree")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", help="directory for tree.txt / tree.dot")
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("verify", help="check action bounds over a state box")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--property", dest="property_file", required=True)
    p.add_argument("--out", help="write the JSON report here")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("deepen", help="grow a tree policy online")
    p.add_argument("--config", required=True)
    p.add_argument("--out", help="output directory (overrides config out_dir)")
    p.set_defaults(func=cmd_deepen)

    p = sub.add_parser("sweep", help="interpretability-performance sweep")
    p.add_argument("--config", required=True)
    p.add_argument("--out", help="output directory (overrides config out_dir)")
    p.set_defaults(func=cmd_sweep)
    return parser


def cmd_train(args) -> int:
    from .runs import run_config

    cfg = load_config(args.config)
    out_root = Path(args.out or cfg.out_dir)
    manifests = run_config(cfg, out_root)
    for m in manifests:
        print(f"seed {m['seed']}: eval {m['eval_mean']:.2f} +- {m['eval_stderr']:.2f} "
              f"({m['steps']} steps) -> {m['run_dir']}")
    return 0


def cmd_eval(args) -> int:
    from .checkpoint import load_checkpoint
    from .envs import make_env
    from .rollout import evaluate, mean_stderr, policy_fn
    from .runs import consistency_check

    model, meta = load_checkpoint(args.checkpoint)
    env_meta = meta.get("env") or {}
    if not env_meta.get("name"):
        raise ConfigError("checkpoint carries no environment metadata")
    env = make_env(env_meta["name"])
    if env.spec.obs_dim != model.m or env.spec.action_dim != model.action_dim:
        raise ConfigError(
            f"checkpoint dims ({model.m}, {model.action_dim}) do not match env "
            f"({env.spec.obs_dim}, {env.spec.action_dim})"
        )
    rng = np.random.default_rng(args.seed)
    returns = evaluate(env, policy_fn(model, rng=rng), args.episodes, args.seed)
    mean, stderr = mean_stderr(returns)
    summary = {
        "checkpoint": str(args.checkpoint),
        "env": env_meta["name"],
        "episodes": args.episodes,
        "seed": args.seed,
        "mean_return": mean,
        "stderr": stderr,
        "returns": returns.tolist(),
    }
    if meta["kind"] != "mlp":
        summary["max_act_crisp_deviation"] = consistency_check(
            args.checkpoint, n_states=10_000, seed=args.seed
        )
    text = json.dumps(summary, indent=2)
    print(text)
    if args.out:
        Path(args.out).write_text(text)
    return 0


def cmd_export(args) -> int:
    from .checkpoint import load_crisp
    from .export import format_dot, format_text

    tree, meta = load_crisp(args.checkpoint)
    names = (meta.get("env") or {}).get("feature_names")
    text = format_text(tree, names)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "tree.txt").write_text(text)
        (out / "tree.dot").write_text(format_dot(tree, names))
        print(f"wrote {out / 'tree.txt'} and {out / 'tree.dot'}")
    else:
        print(text, end="")
    return 0


def cmd_verify(args) -> int:
    from .checkpoint import load_crisp
    from .verify import Box, report_json, verify_bounds

    tree, meta = load_crisp(args.checkpoint)
    names = (meta.get("env") or {}).get("feature_names") or [
        f"x{i}" for i in range(tree.m)
    ]
    try:
        prop = json.loads(Path(args.property_file).read_text())
    except FileNotFoundError:
        raise ConfigError(f"property: no such file {args.property_file!r}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"property: invalid JSON ({exc})") from None

    domain = prop.get("domain", {})
    lo = np.full(tree.m, -1.0)
    hi = np.full(tree.m, 1.0)
    index = {n: i for i, n in enumerate(names)}
    for key, bounds in domain.items():
        if key not in index:
            raise ConfigError(f"property.domain: unknown feature {key!r}")
        lo[index[key]], hi[index[key]] = bounds
    limits = prop.get("limits")
    if limits is None:
        raise ConfigError("property.limits: missing")

    result = verify_bounds(tree, Box(lo, hi), limits)
    print(result.summary(names))
    report = report_json(result, names)
    if args.out:
        Path(args.out).write_text(json.dumps(report, indent=2))
    return 0


def cmd_deepen(args) -> int:
    from .config import build_model
    from .checkpoint import save_checkpoint
    from .deepen import GROWTH_LOG_COLUMNS, DeepenConfig, deepen_loop, growth_log_rows
    from .envs import make_env
    from .sac import SacTrainer

    cfg = load_config(args.config)
    ddoc = cfg.raw.get("deepen", {})
    try:
        dcfg = DeepenConfig(**{k: v for k, v in ddoc.items()})
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"deepen: {exc}") from None

    out_root = Path(args.out or cfg.out_dir)
    out_root.mkdir(parents=True, exist_ok=True)
    rows_all = []
    for seed in cfg.seeds:
        env = make_env(cfg.env)
        model = build_model(cfg, env.spec, seed)
        tcfg = dataclasses.replace(cfg.trainer, seed=seed)
        pretrain = int(cfg.raw.get("pretrain_steps", 0))
        if pretrain:
            pcfg = dataclasses.replace(tcfg, total_steps=pretrain)
            SacTrainer(env, model, pcfg).train()
        dcfg_seed = dataclasses.replace(dcfg, seed=seed)
        result = deepen_loop(model, env, dcfg_seed, dataclasses.replace(tcfg, total_steps=0))
        ckpt = out_root / f"deepened_seed{seed}.json"
        save_checkpoint(result.model, ckpt, env_spec=env.spec)
        for row in growth_log_rows(result):
            rows_all.append([seed] + row)
        print(f"seed {seed}: final depth {result.model.depth} "
              f"({sum(e.swapped for e in result.log)} swaps) -> {ckpt}")
    log_path = out_root / "growth.csv"
    with open(log_path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["seed"] + GROWTH_LOG_COLUMNS)
        writer.writerows(rows_all)
    print(f"growth log: {log_path}")
    return 0


def cmd_sweep(args) -> int:
    from .runs import run_config
    from .rollout import mean_stderr

    cfg = load_config(args.config)
    sweep = cfg.raw.get("sweep", {})
    axis = sweep.get("axis")
    values = sweep.get("values")
    if axis not in ("e", "leaves"):
        raise ConfigError(f"sweep.axis: must be 'e' or 'leaves', got {axis!r}")
    if not values:
        raise ConfigError("sweep.values: missing or empty")

    out_root = Path(args.out or cfg.out_dir)
    out_root.mkdir(parents=True, exist_ok=True)
    points = []
    for v in values:
        doc = json.loads(json.dumps(cfg.raw))  # deep copy
        doc.setdefault("model", {})[axis] = int(v)
        point_cfg = parse_config(doc)
        manifests = run_config(point_cfg, out_root / f"{axis}_{v}")
        returns = [m["eval_mean"] for m in manifests]
        mean, stderr = mean_stderr(returns)
        points.append({
            "axis": axis,
            "value": int(v),
            "mean_return": mean,
            "stderr": stderr,
            "active_params": manifests[0]["params_active"],
        })

    for p in points:
        dominated = any(
            q is not p
            and q["active_params"] <= p["active_params"]
            and q["mean_return"] >= p["mean_return"]
            and (q["active_params"] < p["active_params"] or q["mean_return"] > p["mean_return"])
            for q in points
        )
        p["pareto"] = 0 if dominated else 1

    csv_path = out_root / "sweep.csv"
    with open(csv_path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["axis", "value", "mean_return", "stderr", "active_params", "pareto"])
        for p in points:
            writer.writerow([p["axis"], p["value"], p["mean_return"], p["stderr"],
                             p["active_params"], p["pareto"]])
    print(f"sweep table: {csv_path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
