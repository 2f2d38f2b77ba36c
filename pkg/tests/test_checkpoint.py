import json

import numpy as np
import pytest

from crisptree.baselines import LINEAR, STATIC, MlpActor, SoftTreePolicy
from crisptree.checkpoint import load_checkpoint, load_crisp, save_checkpoint
from crisptree.envs import make_env
from crisptree.tree import TreePolicy, crisp_predict_batch

from test_tree import random_policy


def test_tree_checkpoint_roundtrip_bit_exact(tmp_path, rng):
    tp = random_policy(rng, depth=3, m=4, e=2, action_dim=2)
    path = tmp_path / "ckpt.json"
    save_checkpoint(tp, path, env_spec=make_env("pendulum").spec)
    loaded, meta = load_checkpoint(path)
    for a, b in zip(tp.parameters(), loaded.parameters()):
        assert np.array_equal(a.data, b.data)
    X = rng.normal(size=(100, 4))
    assert np.array_equal(
        tp.forward_batch(X, training=False).action_matrix(),
        loaded.forward_batch(X, training=False).action_matrix(),
    )


def test_checkpoint_schema_keys(tmp_path, rng):
    tp = random_policy(rng, depth=2, m=3, e=1)
    path = tmp_path / "ckpt.json"
    save_checkpoint(tp, path, env_spec=make_env("pendulum").spec)
    doc = json.loads(path.read_text())
    assert set(doc) == {"meta", "nodes", "leaves", "crisp"}
    for key in ("depth", "m", "action_dim", "e", "seed", "variant"):
        assert key in doc["meta"]
    assert set(doc["nodes"][0]) == {"w", "b", "alpha"}
    assert set(doc["leaves"][0]) == {"beta", "theta", "phi", "log_gamma"}
    assert set(doc["crisp"]) == {"nodes", "leaves"}
    assert set(doc["crisp"]["nodes"][0]) == {"k", "threshold", "dir"}
    # crisp leaf entry: e pair objects followed by bias and std
    entry = doc["crisp"]["leaves"][0][0]
    assert len(entry) == tp.e + 2
    assert all(set(p) == {"idx", "coef"} for p in entry[:-2])
    assert isinstance(entry[-2], float) and isinstance(entry[-1], float)


def test_static_model_checkpoint_carries_static_means(tmp_path, rng):
    tp = random_policy(rng, depth=1, m=3, e=0)
    path = tmp_path / "ckpt.json"
    save_checkpoint(tp, path)
    doc = json.loads(path.read_text())
    assert "static" in doc["leaves"][0]
    loaded, _ = load_checkpoint(path)
    assert float(loaded.leaves[0].static[0].data) == float(tp.leaves[0].static[0].data)


def test_crisp_block_is_authoritative_for_inference(tmp_path, rng):
    tp = random_policy(rng, depth=3, m=5, e=2)
    path = tmp_path / "ckpt.json"
    save_checkpoint(tp, path)
    tree, meta = load_crisp(path)
    X = rng.normal(size=(200, 5))
    want = crisp_predict_batch(tp.to_crisp(), X)
    got = crisp_predict_batch(tree, X)
    assert np.allclose(want, got, atol=0)


def test_soft_tree_checkpoint_roundtrip(tmp_path, rng):
    for kind in (STATIC, LINEAR):
        st = SoftTreePolicy(depth=2, m=3, action_dim=1, leaf_kind=kind, seed=4)
        path = tmp_path / f"soft_{kind}.json"
        save_checkpoint(st, path)
        doc = json.loads(path.read_text())
        assert doc["meta"]["kind"] == ("cddt" if kind == STATIC else "cddt_controllers")
        loaded, _ = load_checkpoint(path)
        X = rng.normal(size=(50, 3))
        assert np.array_equal(
            st.forward_batch(X, training=False).action_matrix(),
            loaded.forward_batch(X, training=False).action_matrix(),
        )


def test_mlp_checkpoint_roundtrip(tmp_path, rng):
    mlp = MlpActor(m=4, action_dim=2, hidden=[8, 8], seed=1)
    path = tmp_path / "mlp.json"
    save_checkpoint(mlp, path)
    loaded, meta = load_checkpoint(path)
    assert meta["kind"] == "mlp"
    X = rng.normal(size=(20, 4))
    assert np.array_equal(
        mlp.forward_batch(X, training=False).action_matrix(),
        loaded.forward_batch(X, training=False).action_matrix(),
    )
    with pytest.raises(ValueError):
        load_crisp(path)


def test_env_metadata_written(tmp_path, rng):
    env = make_env("ring")
    tp = TreePolicy(depth=2, m=44, action_dim=1, e=1,
                    action_low=env.spec.action_low, action_high=env.spec.action_high)
    path = tmp_path / "ckpt.json"
    save_checkpoint(tp, path, env_spec=env.spec)
    doc = json.loads(path.read_text())
    assert doc["meta"]["env"]["name"] == "ring"
    assert doc["meta"]["env"]["feature_names"][0] == "pos_ego"
    assert doc["meta"]["env"]["normalization"]["pos_scale"] == 260.0
