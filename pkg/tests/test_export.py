import re

import numpy as np

from crisptree.export import format_dot, format_text

from test_tree import random_policy


def parse_dot(text):
    """Minimal DOT digraph grammar check: returns (nodes, edges)."""
    lines = [l.strip() for l in text.strip().splitlines()]
    assert lines[0].startswith("digraph ") and lines[0].endswith("{")
    assert lines[-1] == "}"
    nodes, edges = {}, []
    stmt = re.compile(r'^(\w+)\s*(\[[^\]]*\])?;$')
    edge = re.compile(r'^(\w+)\s*->\s*(\w+)\s*(\[[^\]]*\])?;$')
    for line in lines[1:-1]:
        if not line:
            continue
        m = edge.match(line)
        if m:
            edges.append((m.group(1), m.group(2)))
            continue
        m = stmt.match(line)
        assert m, f"unparseable DOT statement: {line!r}"
        nodes[m.group(1)] = m.group(2)
    return nodes, edges


def test_text_export_structure(rng):
    tp = random_policy(rng, depth=2, m=3, e=1, action_dim=2)
    names = ["speed", "gap", "accel"]
    text = format_text(tp.to_crisp(), names)
    lines = text.splitlines()
    # one predicate per line; leaves as linear controllers
    assert sum(1 for l in lines if l.strip().startswith("if ")) == 3
    assert sum(1 for l in lines if "a0 =" in l) == 4
    assert sum(1 for l in lines if "a1 =" in l) == 4
    assert any(n in text for n in names)


def test_text_export_uses_feature_names_and_directions():
    from crisptree.actions import ActionBounds
    from crisptree.tree import CrispLeafDim, CrispPredicate, CrispTree

    tree = CrispTree(
        depth=1, m=2, action_dim=1, e=1,
        nodes=[CrispPredicate(feature=1, threshold=-0.5, greater=False)],
        leaves=[[CrispLeafDim(pairs=[(0, 2.0)], bias=0.25, std=0.1)],
                [CrispLeafDim(pairs=[(1, -1.5)], bias=0.0, std=0.1)]],
        bounds=ActionBounds([-1], [1]),
    )
    text = format_text(tree, ["pos", "vel"])
    assert "if vel < -0.5:" in text
    assert "a0 = 2*pos +0.25" in text.replace("+2*pos", "2*pos")


def test_dot_parses_and_covers_tree(rng):
    tp = random_policy(rng, depth=3, m=4, e=2)
    dot = format_dot(tp.to_crisp(), None)
    nodes, edges = parse_dot(dot)
    named = {n for n in nodes if re.match(r"^[nl]\d+$", n)}
    assert len([n for n in named if n.startswith("n")]) == 7
    assert len([n for n in named if n.startswith("l")]) == 8
    assert len(edges) == 14
    for a, b in edges:
        assert a in named and b in named


def test_dot_roundtrip_is_stable(rng):
    tp = random_policy(rng, depth=2, m=3, e=1)
    dot = format_dot(tp.to_crisp())
    n1, e1 = parse_dot(dot)
    n2, e2 = parse_dot(dot)
    assert n1 == n2 and e1 == e2
