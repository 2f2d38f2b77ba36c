"""Human-readable renderings of a crisp tree: indented text and DOT."""

from __future__ import annotations

from .tree import CrispLeafDim, CrispTree


def _predicate_str(pred, names) -> str:
    name = names[pred.feature]
    op = ">" if pred.greater else "<"
    return f"{name} {op} {pred.threshold:.4g}"


def _controller_str(ld: CrispLeafDim, names, dim: int) -> str:
    terms = [f"{c:+.4g}*{names[i]}" for i, c in ld.pairs]
    terms.append(f"{ld.bias:+.4g}")
    rhs = " ".join(terms).lstrip("+")
    return f"a{dim} = {rhs}"


def format_text(tree: CrispTree, feature_names=None) -> str:
    """One predicate per line, leaves as sparse linear controllers."""
    names = feature_names or [f"x{i}" for i in range(tree.m)]
    n_nodes = 2 ** tree.depth - 1
    lines = []

    def walk(slot: int, indent: int):
        pad = "  " * indent
        if slot >= n_nodes:
            for d, ld in enumerate(tree.leaves[slot - n_nodes]):
                lines.append(f"{pad}{_controller_str(ld, names, d)}")
            return
        lines.append(f"{pad}if {_predicate_str(tree.nodes[slot], names)}:")
        walk(2 * slot + 1, indent + 1)
        lines.append(f"{pad}else:")
        walk(2 * slot + 2, indent + 1)

    walk(0, 0)
    return "\n".join(lines) + "\n"


def format_dot(tree: CrispTree, feature_names=None, name="crisptree") -> str:
    """GraphViz digraph; nodes carry predicates, leaves carry controllers."""
    names = feature_names or [f"x{i}" for i in range(tree.m)]
    n_nodes = 2 ** tree.depth - 1
    lines = [f"digraph {name} {{", "  node [shape=ellipse];"]
    for i, pred in enumerate(tree.nodes):
        lines.append(f'  n{i} [label="{_predicate_str(pred, names)}"];')
    for li, dims in enumerate(tree.leaves):
        label = "\\n".join(_controller_str(ld, names, d) for d, ld in enumerate(dims))
        lines.append(f'  l{li} [shape=box, label="{label}"];')

    def child_name(slot: int) -> str:
        return f"n{slot}" if slot < n_nodes else f"l{slot - n_nodes}"

    for i in range(n_nodes):
        lines.append(f'  n{i} -> {child_name(2 * i + 1)} [label="yes"];')
        lines.append(f'  n{i} -> {child_name(2 * i + 2)} [label="no"];')
    lines.append("}")
    return "\n".join(lines) + "\n"
