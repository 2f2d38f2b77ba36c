"""Closed-form analysis of crisp trees over box-bounded state sets.

Each root-leaf path defines an axis-aligned region (intersection of
single-feature half-spaces with the domain box). Leaf controllers are
linear, so their exact output range over a box is attained at per-feature
interval endpoints chosen by coefficient sign; mapping that range through
the monotone action squashing yields exact deployed-action bounds per
region.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .tree import CrispLeafDim, CrispTree


@dataclass
class Box:
    """Per-feature closed interval bounds [lo, hi]."""

    lo: np.ndarray
    hi: np.ndarray
    lo_strict: np.ndarray = None
    hi_strict: np.ndarray = None

    def __post_init__(self):
        self.lo = np.asarray(self.lo, dtype=np.float64)
        self.hi = np.asarray(self.hi, dtype=np.float64)
        if self.lo.shape != self.hi.shape:
            raise ValueError("box bounds must have matching shapes")
        if self.lo_strict is None:
            # fresh user-supplied domain: must be nonempty
            if np.any(self.lo > self.hi):
                raise ValueError("box requires lo <= hi per dimension")
            self.lo_strict = np.zeros(self.lo.shape, dtype=bool)
        if self.hi_strict is None:
            self.hi_strict = np.zeros(self.hi.shape, dtype=bool)

    @property
    def dim(self) -> int:
        return self.lo.size

    def copy(self) -> "Box":
        return Box(self.lo.copy(), self.hi.copy(),
                   self.lo_strict.copy(), self.hi_strict.copy())

    def feasible(self) -> bool:
        if np.any(self.lo > self.hi):
            return False
        degenerate = self.lo == self.hi
        return not np.any(degenerate & (self.lo_strict | self.hi_strict))

    def volume(self) -> float:
        if not self.feasible():
            return 0.0
        return float(np.prod(self.hi - self.lo))

    def contains(self, x) -> bool:
        return bool(np.all(x >= self.lo) and np.all(x <= self.hi))


@dataclass
class RegionReport:
    """One root-leaf path: its predicates, refined box, and exact per-dim
    pre-squash output range of the leaf controller (when feasible)."""

    leaf_index: int
    path: list  # (feature, ">" or "<=", threshold) conjunction, root first
    box: Box
    feasible: bool
    raw_range: np.ndarray | None = None  # (action_dim, 2)

    def path_str(self, names=None) -> str:
        def nm(k):
            return names[k] if names else f"x{k}"

        return " and ".join(f"{nm(k)} {op} {t:.6g}" for k, op, t in self.path)


def enumerate_regions(tree: CrispTree, domain: Box, stats: dict | None = None):
    """All 2^depth root-leaf regions of the tree intersected with ``domain``.

    Feasible regions partition the domain up to measure-zero boundaries;
    infeasible paths are reported with their flag unset.
    """
    if domain.dim != tree.m:
        raise ValueError(f"domain has {domain.dim} dims, tree expects {tree.m}")
    n_nodes = 2 ** tree.depth - 1
    regions = []

    def tick(key):
        if stats is not None:
            stats[key] = stats.get(key, 0) + 1

    def descend(slot: int, box: Box, path: list):
        if slot >= n_nodes:
            leaf = slot - n_nodes
            feasible = box.feasible()
            rr = None
            if feasible:
                rr = np.stack(
                    [leaf_output_range(ld, box) for ld in tree.leaves[leaf]]
                )
                tick("range_evals")
            regions.append(RegionReport(leaf, list(path), box, feasible, rr))
            return
        pred = tree.nodes[slot]
        k, t = pred.feature, pred.threshold
        tick("intersections")
        if pred.greater:
            # true branch: x_k > t (strict); false branch: x_k <= t
            left = box.copy()
            if t > left.lo[k] or (t == left.lo[k] and not left.lo_strict[k]):
                left.lo[k] = max(left.lo[k], t)
                left.lo_strict[k] = True
            right = box.copy()
            right.hi[k] = min(right.hi[k], t)
            descend(2 * slot + 1, left, path + [(k, ">", t)])
            descend(2 * slot + 2, right, path + [(k, "<=", t)])
        else:
            # true branch: x_k < t (strict); false branch: x_k >= t
            left = box.copy()
            left.hi[k] = min(left.hi[k], t)
            left.hi_strict[k] = True
            right = box.copy()
            right.lo[k] = max(right.lo[k], t)
            descend(2 * slot + 1, left, path + [(k, "<", t)])
            descend(2 * slot + 2, right, path + [(k, ">=", t)])

    descend(0, domain.copy(), [])
    return regions


def leaf_output_range(ld: CrispLeafDim, box: Box) -> np.ndarray:
    """Exact [min, max] of bias + sum(c_i x_i) over the box: each term takes
    the interval endpoint selected by the sign of its coefficient."""
    lo = hi = ld.bias
    for k, c in ld.pairs:
        if c >= 0.0:
            lo += c * box.lo[k]
            hi += c * box.hi[k]
        else:
            lo += c * box.hi[k]
            hi += c * box.lo[k]
    return np.array([lo, hi])


@dataclass
class Violation:
    region: RegionReport
    dim: int
    action_range: tuple
    limits: tuple


@dataclass
class VerifyResult:
    passed: bool
    regions: list
    violations: list = field(default_factory=list)

    def summary(self, names=None) -> str:
        lines = [
            f"{'PASS' if self.passed else 'FAIL'}: "
            f"{sum(r.feasible for r in self.regions)} feasible regions "
            f"of {len(self.regions)} checked"
        ]
        for v in self.violations:
            lines.append(
                f"  dim {v.dim}: action in [{v.action_range[0]:.6g}, "
                f"{v.action_range[1]:.6g}] exceeds [{v.limits[0]:.6g}, "
                f"{v.limits[1]:.6g}] where {v.region.path_str(names)}"
            )
        return "\n".join(lines)


def verify_bounds(tree: CrispTree, domain: Box, action_limits) -> VerifyResult:
    """PASS iff, in every feasible region, the squashed action range lies
    inside ``action_limits``; violations carry the region's predicate path
    (a human-checkable counterexample certificate)."""
    limits = np.asarray(action_limits, dtype=np.float64).reshape(tree.action_dim, 2)
    regions = enumerate_regions(tree, domain)
    violations = []
    center, half = tree.bounds.center, tree.bounds.half
    for region in regions:
        if not region.feasible:
            continue
        for d in range(tree.action_dim):
            raw_lo, raw_hi = region.raw_range[d]
            a_lo = center[d] + half[d] * math.tanh(raw_lo)
            a_hi = center[d] + half[d] * math.tanh(raw_hi)
            if a_lo < limits[d, 0] or a_hi > limits[d, 1]:
                violations.append(
                    Violation(region, d, (a_lo, a_hi), (limits[d, 0], limits[d, 1]))
                )
    return VerifyResult(passed=not violations, regions=regions, violations=violations)


def report_json(result: VerifyResult, names=None) -> dict:
    return {
        "passed": result.passed,
        "regions_checked": len(result.regions),
        "regions_feasible": int(sum(r.feasible for r in result.regions)),
        "violations": [
            {
                "path": v.region.path_str(names),
                "leaf": v.region.leaf_index,
                "action_dim": v.dim,
                "action_range": list(v.action_range),
                "limits": list(v.limits),
            }
            for v in result.violations
        ],
    }
