"""Hot inner-loop kernels: batch crisp-tree inference and the ring-road
car-following update.

A compiled Cython core is used when available; a pure-NumPy implementation
with identical semantics is the fallback. Set ``CRISPTREE_PURE_PYTHON=1``
to force the fallback (used by the benchmark and the agreement tests).
"""

import os

from . import _reference

if os.environ.get("CRISPTREE_PURE_PYTHON"):
    _impl = _reference
    USING_COMPILED = False
else:
    try:
        from . import _fastcore as _impl

        USING_COMPILED = True
    except ImportError:
        _impl = _reference
        USING_COMPILED = False


def tree_predict(flat, X):
    """Actions of a flattened crisp tree on a batch of states: (B, adim)."""
    return _impl.tree_predict(flat, X)


def ring_step(pos, vel, ego_accel, noise, p):
    """One ring-road tick; returns (new_pos, new_vel, min_gap)."""
    return _impl.ring_step(pos, vel, ego_accel, noise, p)


def reference_tree_predict(flat, X):
    return _reference.tree_predict(flat, X)


def reference_ring_step(pos, vel, ego_accel, noise, p):
    return _reference.ring_step(pos, vel, ego_accel, noise, p)
