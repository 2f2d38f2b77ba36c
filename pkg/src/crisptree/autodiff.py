"""Minimal reverse-mode automatic differentiation over dense float64 arrays.

A ``Tape`` records primitive operations while it is active (``with Tape():``);
``backward`` replays it once in reverse. When no tape is active the same ops
run forward-only with no recording overhead, which is the fast path used for
rollouts and deterministic evaluation.

Hard selection primitives (``diff_argmax``, ``diff_khot``, ``hard_step``)
return exact {0,1} values in the forward pass but backpropagate the gradient
of their softmax/sigmoid surrogates (straight-through estimation). Their
backward rules share code with the soft ops so the two paths are bit-equal.
"""

from __future__ import annotations

import math

import numpy as np

__all__ = [
    "Value",
    "Tape",
    "param",
    "const",
    "backward",
    "zero_grad",
    "add",
    "sub",
    "mul",
    "scale",
    "matmul",
    "dot",
    "sigmoid",
    "tanh",
    "exp",
    "log",
    "absolute",
    "relu",
    "softplus",
    "reduce_sum",
    "reduce_mean",
    "minimum",
    "maximum",
    "softmax",
    "squared_error",
    "gaussian_log_density",
    "concat_cols",
    "hard_step",
    "diff_argmax",
    "diff_khot",
    "gumbel_softmax",
    "sample_gumbel",
]

_LOG_2PI = math.log(2.0 * math.pi)


class Value:
    """A float64 array plus bookkeeping for the recording tape."""

    __slots__ = ("data", "requires_grad", "grad", "node")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.grad = None
        self.node = None  # index of the producing record in the active tape

    @property
    def shape(self):
        return self.data.shape

    def item(self) -> float:
        return float(self.data)

    def __repr__(self):
        return f"Value(shape={self.data.shape}, requires_grad={self.requires_grad})"

    # Operator sugar; all routed through the module-level primitives.
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __neg__(self):
        return scale(self, -1.0)


class Tape:
    """Ordered record of operations; append order is already topological."""

    def __init__(self):
        self.records = []  # (op kind, input Values, output Value, saved)

    def __len__(self):
        return len(self.records)

    def __enter__(self):
        global _ACTIVE
        if _ACTIVE is not None:
            raise RuntimeError("a Tape is already active")
        _ACTIVE = self
        return self

    def __exit__(self, *exc):
        global _ACTIVE
        _ACTIVE = None
        return False


_ACTIVE: Tape | None = None


def param(data) -> Value:
    """A trainable leaf Value."""
    return Value(data, requires_grad=True)


def const(data) -> Value:
    return Value(data, requires_grad=False)


def _wrap(x) -> Value:
    return x if isinstance(x, Value) else Value(x)


def _make(kind: str, inputs: tuple, out_data, saved=None) -> Value:
    rg = False
    for v in inputs:
        if v.requires_grad:
            rg = True
            break
    out = object.__new__(Value)  # results of f64 ops need no coercion
    out.data = out_data if isinstance(out_data, np.ndarray) else np.asarray(out_data, dtype=np.float64)
    out.requires_grad = rg
    out.grad = None
    out.node = None
    if rg and _ACTIVE is not None:
        out.node = len(_ACTIVE.records)
        _ACTIVE.records.append((kind, inputs, out, saved))
    return out


def zero_grad(values) -> None:
    for v in values:
        v.grad = None


def backward(loss: Value) -> dict:
    """Accumulate d(loss)/d(v) into ``v.grad`` for every requires_grad Value.

    Returns a map from Value to its gradient array; Values absent from the
    map received no gradient (i.e. it is exactly zero).
    """
    if loss.data.size != 1:
        raise ValueError(f"loss must be scalar, got shape {loss.data.shape}")
    if _ACTIVE is None:
        raise RuntimeError("backward requires the recording Tape to be active")
    tape = _ACTIVE
    grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    by_id: dict[int, Value] = {id(loss): loss}
    stop = loss.node
    if stop is None:
        out = {loss: grads[id(loss)]} if loss.requires_grad else {}
        for v, g in out.items():
            v.grad = g if v.grad is None else v.grad + g
        return out
    for kind, inputs, out, saved in reversed(tape.records[: stop + 1]):
        g = grads.get(id(out))
        if g is None:
            continue
        for v, gi in zip(inputs, _BACKWARD[kind](g, inputs, out, saved)):
            if gi is None or not v.requires_grad:
                continue
            key = id(v)
            if key in grads:
                grads[key] = grads[key] + gi
            else:
                grads[key] = gi
                by_id[key] = v
    result = {}
    for key, g in grads.items():
        v = by_id[key]
        if not v.requires_grad:
            continue
        result[v] = g
        if v.node is None:  # leaf: expose accumulated grad for optimizers
            v.grad = g if v.grad is None else v.grad + g
    return result


def _check_same_shape(kind, a, b):
    if a.data.shape != b.data.shape:
        raise ValueError(f"{kind}: shape mismatch {a.data.shape} vs {b.data.shape}")


# ---------------------------------------------------------------------------
# elementwise arithmetic (same shape, scalar broadcast, or matrix + row bias)


def _bcast_kind(a: np.ndarray, b: np.ndarray) -> str:
    if a.shape == b.shape:
        return "same"
    if b.ndim == 0:
        return "bscalar"
    if a.ndim == 0:
        return "ascalar"
    if a.ndim == 2 and b.ndim == 1 and a.shape[1] == b.shape[0]:
        return "rowvec"
    raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")


def _reduce_to(g: np.ndarray, shape) -> np.ndarray:
    if g.shape == shape:
        return g
    if shape == ():
        return np.asarray(g.sum())
    return g.sum(axis=0)  # matrix grad -> row-vector operand


def add(a, b) -> Value:
    a, b = _wrap(a), _wrap(b)
    _bcast_kind(a.data, b.data)
    return _make("add", (a, b), a.data + b.data)


def sub(a, b) -> Value:
    a, b = _wrap(a), _wrap(b)
    _bcast_kind(a.data, b.data)
    return _make("sub", (a, b), a.data - b.data)


def mul(a, b) -> Value:
    """Elementwise product; one operand may be a scalar."""
    a, b = _wrap(a), _wrap(b)
    kind = _bcast_kind(a.data, b.data)
    if kind == "rowvec":
        raise ValueError(f"mul: shape mismatch {a.data.shape} vs {b.data.shape}")
    return _make("mul", (a, b), a.data * b.data)


def scale(x, c) -> Value:
    """Scalar scale: c * x with scalar c."""
    x, c = _wrap(x), _wrap(c)
    if c.data.ndim != 0:
        raise ValueError(f"scale: scale factor must be scalar, got {c.data.shape}")
    return mul(x, c)


_BACKWARD = {}

_BACKWARD["add"] = lambda g, ins, out, s: (
    _reduce_to(g, ins[0].data.shape),
    _reduce_to(g, ins[1].data.shape),
)
_BACKWARD["sub"] = lambda g, ins, out, s: (
    _reduce_to(g, ins[0].data.shape),
    _reduce_to(-g, ins[1].data.shape),
)
_BACKWARD["mul"] = lambda g, ins, out, s: (
    _reduce_to(g * ins[1].data, ins[0].data.shape),
    _reduce_to(g * ins[0].data, ins[1].data.shape),
)


# ---------------------------------------------------------------------------
# linear algebra


def matmul(a, b) -> Value:
    """Matrix product; the right operand may be a vector (matrix-vector)."""
    a, b = _wrap(a), _wrap(b)
    ad, bd = a.data, b.data
    if ad.ndim not in (1, 2) or bd.ndim not in (1, 2):
        raise ValueError(f"matmul: unsupported ranks {ad.shape} @ {bd.shape}")
    if ad.shape[-1] != bd.shape[0]:
        raise ValueError(f"matmul: shape mismatch {ad.shape} @ {bd.shape}")
    return _make("matmul", (a, b), ad @ bd)


def _matmul_bwd(g, ins, out, s):
    a, b = ins[0].data, ins[1].data
    if a.ndim == 1:
        a2, ga_shape = a[None, :], "row"
    else:
        a2, ga_shape = a, None
    if b.ndim == 1:
        b2 = b[:, None]
        g2 = g.reshape(a2.shape[0], 1)
    else:
        b2 = b
        g2 = g.reshape(a2.shape[0], b2.shape[1])
    ga = gb = None
    if ins[0].requires_grad:
        ga = g2 @ b2.T
        if ga_shape == "row":
            ga = ga[0]
    if ins[1].requires_grad:
        gb = a2.T @ g2
        if b.ndim == 1:
            gb = gb[:, 0]
    return (ga, gb)


_BACKWARD["matmul"] = _matmul_bwd


def dot(a, b) -> Value:
    a, b = _wrap(a), _wrap(b)
    if a.data.ndim != 1 or b.data.ndim != 1 or a.data.shape != b.data.shape:
        raise ValueError(f"dot: shape mismatch {a.data.shape} vs {b.data.shape}")
    return _make("dot", (a, b), np.asarray(a.data @ b.data))


_BACKWARD["dot"] = lambda g, ins, out, s: (g * ins[1].data, g * ins[0].data)


def concat_cols(*parts) -> Value:
    """Stack vectors/matrices that share a leading axis into one matrix."""
    parts = tuple(_wrap(p) for p in parts)
    cols = [p.data[:, None] if p.data.ndim == 1 else p.data for p in parts]
    n0 = cols[0].shape[0]
    if any(c.shape[0] != n0 for c in cols):
        raise ValueError(
            "concat_cols: leading axis mismatch "
            + str([p.data.shape for p in parts])
        )
    widths = [c.shape[1] for c in cols]
    return _make("concat", parts, np.concatenate(cols, axis=1), tuple(widths))


def _concat_bwd(g, ins, out, widths):
    gs, j = [], 0
    for v, w in zip(ins, widths):
        piece = g[:, j : j + w]
        gs.append(piece[:, 0] if v.data.ndim == 1 else piece)
        j += w
    return tuple(gs)


_BACKWARD["concat"] = _concat_bwd


# ---------------------------------------------------------------------------
# elementwise nonlinearities


def _stable_sigmoid(x: np.ndarray) -> np.ndarray:
    if x.ndim == 0:
        v = float(x)
        if v >= 0.0:
            return np.asarray(1.0 / (1.0 + math.exp(-v)))
        ev = math.exp(v)
        return np.asarray(ev / (1.0 + ev))
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def sigmoid(x) -> Value:
    x = _wrap(x)
    return _make("sigmoid", (x,), _stable_sigmoid(x.data))


_BACKWARD["sigmoid"] = lambda g, ins, out, s: (g * out.data * (1.0 - out.data),)


def tanh(x) -> Value:
    x = _wrap(x)
    return _make("tanh", (x,), np.tanh(x.data))


_BACKWARD["tanh"] = lambda g, ins, out, s: (g * (1.0 - out.data * out.data),)


def exp(x) -> Value:
    x = _wrap(x)
    return _make("exp", (x,), np.exp(x.data))


_BACKWARD["exp"] = lambda g, ins, out, s: (g * out.data,)


def log(x) -> Value:
    x = _wrap(x)
    if np.any(x.data <= 0.0):
        raise ValueError("log: nonpositive input")
    return _make("log", (x,), np.log(x.data))


_BACKWARD["log"] = lambda g, ins, out, s: (g / ins[0].data,)


def absolute(x) -> Value:
    x = _wrap(x)
    return _make("abs", (x,), np.abs(x.data))


# subgradient at 0 chosen as 0 (np.sign(0) == 0)
_BACKWARD["abs"] = lambda g, ins, out, s: (g * np.sign(ins[0].data),)


def relu(x) -> Value:
    x = _wrap(x)
    return _make("relu", (x,), np.maximum(x.data, 0.0))


_BACKWARD["relu"] = lambda g, ins, out, s: (g * (ins[0].data > 0.0),)


def softplus(x) -> Value:
    x = _wrap(x)
    return _make("softplus", (x,), np.logaddexp(0.0, x.data))


_BACKWARD["softplus"] = lambda g, ins, out, s: (g * _stable_sigmoid(ins[0].data),)


def minimum(a, b) -> Value:
    """Elementwise min; the gradient of a tie goes to the first operand."""
    a, b = _wrap(a), _wrap(b)
    kind = _bcast_kind(a.data, b.data)
    if kind == "rowvec":
        raise ValueError(f"minimum: shape mismatch {a.data.shape} vs {b.data.shape}")
    return _make("min", (a, b), np.minimum(a.data, b.data), np.asarray(a.data <= b.data))


def _min_bwd(g, ins, out, take_a):
    return (
        _reduce_to(g * take_a, ins[0].data.shape),
        _reduce_to(g * ~take_a, ins[1].data.shape),
    )


_BACKWARD["min"] = _min_bwd


def maximum(a, b) -> Value:
    return -minimum(-_wrap(a), -_wrap(b))


# ---------------------------------------------------------------------------
# reductions and losses


def reduce_sum(x) -> Value:
    x = _wrap(x)
    return _make("sum", (x,), np.asarray(x.data.sum()))


_BACKWARD["sum"] = lambda g, ins, out, s: (np.broadcast_to(g, ins[0].data.shape).copy(),)


def reduce_mean(x) -> Value:
    x = _wrap(x)
    return _make("mean", (x,), np.asarray(x.data.mean()))


_BACKWARD["mean"] = lambda g, ins, out, s: (
    np.broadcast_to(g / ins[0].data.size, ins[0].data.shape).copy(),
)


def squared_error(a, b) -> Value:
    a, b = _wrap(a), _wrap(b)
    _check_same_shape("squared_error", a, b)
    d = a.data - b.data
    return _make("sqerr", (a, b), d * d, d)


_BACKWARD["sqerr"] = lambda g, ins, out, d: (2.0 * g * d, -2.0 * g * d)


def gaussian_log_density(x, mean, std) -> Value:
    """Elementwise log N(x; mean, std^2). Differentiable in all three."""
    x, mean, std = _wrap(x), _wrap(mean), _wrap(std)
    _check_same_shape("gaussian_log_density", x, mean)
    _check_same_shape("gaussian_log_density", x, std)
    if np.any(std.data <= 0.0):
        raise ValueError("gaussian_log_density: std must be positive")
    z = (x.data - mean.data) / std.data
    lp = -0.5 * z * z - np.log(std.data) - 0.5 * _LOG_2PI
    return _make("gausslp", (x, mean, std), lp, z)


def _gausslp_bwd(g, ins, out, z):
    std = ins[2].data
    gx = -g * z / std
    return (gx, -gx, g * (z * z - 1.0) / std)


_BACKWARD["gausslp"] = _gausslp_bwd


# ---------------------------------------------------------------------------
# softmax family and straight-through hard selections


def _softmax_fwd(x: np.ndarray, tau: float) -> np.ndarray:
    z = x / tau
    z = z - z.max()
    e = np.exp(z)
    return e / e.sum()


def _softmax_jacobian_apply(g: np.ndarray, y: np.ndarray, tau: float) -> np.ndarray:
    return (y * g - y * (y @ g)) / tau


def softmax(x, tau: float = 1.0) -> Value:
    x = _wrap(x)
    if x.data.ndim != 1:
        raise ValueError(f"softmax: expected vector, got shape {x.data.shape}")
    if tau <= 0.0:
        raise ValueError("softmax: temperature must be positive")
    y = _softmax_fwd(x.data, tau)
    return _make("softmax", (x,), y, (y, tau))


def _softmax_bwd(g, ins, out, s):
    soft, tau = s
    if soft is None:  # hard-selection op: the soft path is recomputed lazily
        soft = _softmax_fwd(ins[0].data, tau)
    return (_softmax_jacobian_apply(g, soft, tau),)


_BACKWARD["softmax"] = _softmax_bwd


def _one_hot(idx: int, n: int) -> np.ndarray:
    h = np.zeros(n)
    h[idx] = 1.0
    return h


def diff_argmax(x) -> Value:
    """Exact one-hot at the argmax; backpropagates the softmax (tau=1) path.

    Ties go to the lowest index.
    """
    x = _wrap(x)
    if x.data.ndim != 1 or x.data.size == 0:
        raise ValueError(f"diff_argmax: expected nonempty vector, got {x.data.shape}")
    hard = _one_hot(int(np.argmax(x.data)), x.data.size)
    return _make("softmax", (x,), hard, (None, 1.0))


def diff_khot(x, k: int) -> Value:
    """Exact k-hot at the k largest entries; softmax (tau=1) backward path.

    Ties go to the lowest index.
    """
    x = _wrap(x)
    if x.data.ndim != 1:
        raise ValueError(f"diff_khot: expected vector, got shape {x.data.shape}")
    n = x.data.size
    if not 0 <= k <= n:
        raise ValueError(f"diff_khot: k={k} out of range for length {n}")
    hard = np.zeros(n)
    if k > 0:
        hard[np.argsort(-x.data, kind="stable")[:k]] = 1.0
    return _make("softmax", (x,), hard, (None, 1.0))


def hard_step(x) -> Value:
    """Elementwise 1(x > 0) forward with the sigmoid gradient backward.

    Equivalent to taking the first component of diff_argmax([x_i, 0]) for
    each element, vectorized.
    """
    x = _wrap(x)
    return _make("hardstep", (x,), (x.data > 0.0).astype(np.float64))


def _hardstep_bwd(g, ins, out, s):
    sig = _stable_sigmoid(ins[0].data)
    return (g * sig * (1.0 - sig),)


_BACKWARD["hardstep"] = _hardstep_bwd


def sample_gumbel(shape, rng: np.random.Generator) -> np.ndarray:
    u = rng.uniform(size=shape)
    return -np.log(-np.log(u))


def gumbel_softmax(x, tau: float, rng: np.random.Generator | None = None, noise=None) -> Value:
    """softmax((x + g) / tau) with g ~ Gumbel(0,1) i.i.d.

    ``noise`` overrides the sampled perturbation (test hook).
    """
    x = _wrap(x)
    if x.data.ndim != 1:
        raise ValueError(f"gumbel_softmax: expected vector, got shape {x.data.shape}")
    if tau <= 0.0:
        raise ValueError("gumbel_softmax: temperature must be positive")
    if noise is None:
        if rng is None:
            raise ValueError("gumbel_softmax: need an rng or explicit noise")
        noise = sample_gumbel(x.data.shape, rng)
    y = _softmax_fwd(x.data + noise, tau)
    return _make("softmax", (x,), y, (y, tau))
