"""Reverse-mode differentiation over dense 2-D matrices.

Everything the model computes is a `DiffNode` holding a 2-D numpy array
(row-major; float32 for training, float64 for gradient checking -- the dtype
of a graph is inherited from the arrays fed into it, there is no global
switch).  Each op records its parents and a backward closure; `backward`
topologically sorts the recorded graph and accumulates gradients.

Order-sensitive reductions (row pooling, softmax denominators, the
attention-weighted mixing of value rows) sort their addends before summing.
Floating-point addition does not commute, so this canonical ordering is what
makes row-permuted inputs produce bitwise-identical outputs rather than
merely close ones.  Inner products of matrix multiplies run over the feature
axis, which is never permuted, so plain BLAS calls stay safe.
"""

from __future__ import annotations

import numpy as np

from ..errors import ConfigError, ContractError, DataError, ShapeError

# A FeatureMatrix is a 2-D C-contiguous numpy array, rows x cols.
FeatureMatrix = np.ndarray


def as_matrix(x, dtype=None) -> np.ndarray:
    """Coerce to a 2-D array. 1-D input becomes a single row."""
    arr = np.asarray(x, dtype=dtype)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2:
        raise ShapeError(f"expected a 2-D matrix, got shape {arr.shape}")
    return arr


class DiffNode:
    """One node of a recorded forward pass.

    value:   the computed 2-D array
    grad:    dL/d(value), filled in by backward()
    parents: nodes this one was computed from
    """

    __slots__ = ("value", "grad", "parents", "_bwd", "requires_grad", "name")

    def __init__(self, value, parents=(), bwd=None, requires_grad=False, name=None):
        self.value = value
        self.grad = None
        self.parents = tuple(parents)
        self._bwd = bwd
        self.requires_grad = requires_grad or any(p.requires_grad for p in self.parents)
        self.name = name

    @property
    def shape(self):
        return self.value.shape

    def __repr__(self):
        tag = f" name={self.name!r}" if self.name else ""
        return f"DiffNode(shape={self.value.shape}, dtype={self.value.dtype}{tag})"


def parameter(value, name=None) -> DiffNode:
    """A leaf node whose gradient we want."""
    return DiffNode(as_matrix(value), requires_grad=True, name=name)


def constant(value, dtype=None) -> DiffNode:
    """A leaf node treated as fixed data."""
    return DiffNode(as_matrix(value, dtype=dtype))


def as_node(x) -> DiffNode:
    return x if isinstance(x, DiffNode) else constant(x)


def backward(loss: DiffNode, params=()) -> dict:
    """Accumulate dL/dp into .grad for every node reachable from `loss`.

    `loss` must be 1x1.  Nodes in `params` that the loss does not depend on
    get an explicit zero gradient.  Returns {name: grad} for named nodes in
    `params`.  Gradients are assigned fresh (not accumulated across calls).
    """
    if not isinstance(loss, DiffNode):
        raise ContractError("backward() expects a DiffNode")
    if loss.value.shape != (1, 1):
        raise ContractError(
            f"backward() expects a 1x1 scalar loss, got shape {loss.value.shape}"
        )

    # Post-order DFS, iterative so deep graphs cannot hit the recursion limit.
    order = []
    visited = set()
    stack = [(loss, False)]
    while stack:
        node, processed = stack.pop()
        if processed:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for parent in node.parents:
            if parent.requires_grad and id(parent) not in visited:
                stack.append((parent, False))

    pending = {id(loss): np.ones((1, 1), dtype=loss.value.dtype)}
    for node in reversed(order):
        g = pending.pop(id(node), None)
        if g is None:
            continue
        node.grad = g
        if node._bwd is None:
            continue
        parent_grads = node._bwd(g)
        for parent, pg in zip(node.parents, parent_grads):
            if pg is None or not parent.requires_grad:
                continue
            acc = pending.get(id(parent))
            pending[id(parent)] = pg if acc is None else acc + pg

    out = {}
    for p in params:
        if id(p) not in visited or p.grad is None:
            p.grad = np.zeros_like(p.value)
        if p.name is not None:
            out[p.name] = p.grad
    return out


def _ordered_sum(x, axis):
    """Sum with a canonical addend order, so permuting the summed axis
    cannot change the result even in the last bit."""
    return np.sum(np.sort(x, axis=axis), axis=axis, keepdims=True)


def _unbroadcast(g, shape):
    """Reduce a gradient back to `shape` after 2-D broadcasting."""
    if g.shape == shape:
        return g
    if shape[0] == 1 and g.shape[0] != 1:
        g = g.sum(axis=0, keepdims=True)
    if shape[1] == 1 and g.shape[1] != 1:
        g = g.sum(axis=1, keepdims=True)
    return g


def _check_broadcast(a, b, opname):
    for ax in (0, 1):
        if a.shape[ax] != b.shape[ax] and a.shape[ax] != 1 and b.shape[ax] != 1:
            raise ShapeError(f"{opname}: shapes {a.shape} and {b.shape} do not broadcast")


def matmul(a, b) -> DiffNode:
    a, b = as_node(a), as_node(b)
    av, bv = a.value, b.value
    if av.shape[1] != bv.shape[0]:
        raise ShapeError(f"matmul: inner dimensions differ, {av.shape} x {bv.shape}")

    def bwd(g):
        return g @ bv.T, av.T @ g

    return DiffNode(av @ bv, (a, b), bwd)


def add(a, b) -> DiffNode:
    a, b = as_node(a), as_node(b)
    av, bv = a.value, b.value
    _check_broadcast(av, bv, "add")

    def bwd(g):
        return _unbroadcast(g, av.shape), _unbroadcast(g, bv.shape)

    return DiffNode(av + bv, (a, b), bwd)


def sub(a, b) -> DiffNode:
    a, b = as_node(a), as_node(b)
    av, bv = a.value, b.value
    _check_broadcast(av, bv, "sub")

    def bwd(g):
        return _unbroadcast(g, av.shape), _unbroadcast(-g, bv.shape)

    return DiffNode(av - bv, (a, b), bwd)


def mul(a, b) -> DiffNode:
    """Elementwise product with 2-D broadcasting (rows or cols of size 1)."""
    a, b = as_node(a), as_node(b)
    av, bv = a.value, b.value
    _check_broadcast(av, bv, "mul")

    def bwd(g):
        return _unbroadcast(g * bv, av.shape), _unbroadcast(g * av, bv.shape)

    return DiffNode(av * bv, (a, b), bwd)


def scale(a, c: float) -> DiffNode:
    a = as_node(a)
    c = float(c)

    def bwd(g):
        return (g * c,)

    return DiffNode(a.value * c, (a,), bwd)


def square(a) -> DiffNode:
    a = as_node(a)
    av = a.value

    def bwd(g):
        return (2.0 * av * g,)

    return DiffNode(av * av, (a,), bwd)


def relu(a) -> DiffNode:
    a = as_node(a)
    mask = a.value > 0

    def bwd(g):
        return (g * mask,)

    return DiffNode(np.where(mask, a.value, a.value.dtype.type(0)), (a,), bwd)


def softplus(a) -> DiffNode:
    """log(1 + exp(x)), computed as max(x, 0) + log1p(exp(-|x|)) so large
    magnitudes neither overflow nor lose the tail."""
    a = as_node(a)
    v = a.value
    out = np.maximum(v, 0) + np.log1p(np.exp(-np.abs(v)))
    sig = _sigmoid(v)

    def bwd(g):
        return (g * sig,)

    return DiffNode(out, (a,), bwd)


def _sigmoid(v):
    out = np.empty_like(v)
    pos = v >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-v[pos]))
    ev = np.exp(v[~pos])
    out[~pos] = ev / (1.0 + ev)
    return out


def dropout(a, p: float, mode: str, rng=None) -> DiffNode:
    """Inverted dropout. Train mode zeroes entries with probability p and
    rescales survivors by 1/(1-p); eval mode returns the input node itself,
    so it is bitwise the identity."""
    try:
        p = float(p)
    except (TypeError, ValueError):
        raise ConfigError(f"dropout probability must be a number, got {p!r}") from None
    if not 0.0 <= p < 1.0:
        raise ConfigError(f"dropout probability must satisfy 0 <= p < 1, got {p!r}")
    if mode not in ("train", "eval"):
        raise ConfigError(f"dropout mode must be 'train' or 'eval', got {mode!r}")
    a = as_node(a)
    if mode == "eval" or p == 0.0:
        return a
    if rng is None:
        raise ConfigError("dropout in train mode requires an rng")
    keep = rng.random(a.value.shape) >= p
    factor = keep.astype(a.value.dtype) / a.value.dtype.type(1.0 - p)

    def bwd(g):
        return (g * factor,)

    return DiffNode(a.value * factor, (a,), bwd)


def softmax_rows(a) -> DiffNode:
    """Row-wise softmax. The running max is subtracted before
    exponentiation; the denominator sums in canonical order."""
    a = as_node(a)
    v = a.value
    shifted = v - v.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    y = e / _ordered_sum(e, axis=1)

    def bwd(g):
        inner = np.sum(g * y, axis=1, keepdims=True)
        return ((g - inner) * y,)

    return DiffNode(y, (a,), bwd)


def layer_norm_core(a, eps: float = 1e-5) -> DiffNode:
    """Per-row standardization (x - mean) / sqrt(var + eps), population
    variance, no learned affine. A constant row maps to zeros because eps
    sits inside the square root."""
    a = as_node(a)
    v = a.value
    if v.shape[1] < 2:
        raise ShapeError(f"layer_norm_core needs >= 2 columns, got shape {v.shape}")
    mu = v.mean(axis=1, keepdims=True)
    centered = v - mu
    var = np.mean(centered * centered, axis=1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = centered * inv

    def bwd(g):
        gm = g.mean(axis=1, keepdims=True)
        gx = np.mean(g * xhat, axis=1, keepdims=True)
        return (inv * (g - gm - xhat * gx),)

    return DiffNode(xhat, (a,), bwd)


def avg_pool_rows(a) -> DiffNode:
    """Column means as a single row, accumulated in canonical order so any
    row permutation of the input yields the identical bit pattern."""
    a = as_node(a)
    n = a.value.shape[0]
    if n == 0:
        raise DataError("avg_pool_rows: input has no rows")
    pooled = _ordered_sum(a.value, axis=0) / n

    def bwd(g):
        return (np.repeat(g / n, n, axis=0),)

    return DiffNode(pooled, (a,), bwd)


def linear(x, w, b) -> DiffNode:
    """x @ w + b with b broadcast across rows."""
    x, w, b = as_node(x), as_node(w), as_node(b)
    if x.value.shape[1] != w.value.shape[0]:
        raise ShapeError(
            f"linear: input {x.value.shape} does not match weight {w.value.shape}"
        )
    if b.value.shape != (1, w.value.shape[1]):
        raise ShapeError(
            f"linear: bias {b.value.shape} does not match weight {w.value.shape}"
        )
    return add(matmul(x, w), b)


def transpose(a) -> DiffNode:
    a = as_node(a)

    def bwd(g):
        return (g.T,)

    return DiffNode(a.value.T.copy(), (a,), bwd)


def take_rows(a, indices) -> DiffNode:
    """Gather rows in the given order."""
    a = as_node(a)
    idx = np.asarray(indices, dtype=np.intp)
    n = a.value.shape[0]
    if idx.ndim != 1 or idx.size == 0:
        raise DataError("take_rows: indices must be a non-empty 1-D sequence")
    if idx.min() < 0 or idx.max() >= n:
        raise DataError(f"take_rows: index out of range for {n} rows: {idx.tolist()}")

    def bwd(g):
        da = np.zeros_like(a.value)
        np.add.at(da, idx, g)
        return (da,)

    return DiffNode(a.value[idx].copy(), (a,), bwd)


def concat_rows(a, b) -> DiffNode:
    a, b = as_node(a), as_node(b)
    if a.value.shape[1] != b.value.shape[1]:
        raise ShapeError(
            f"concat_rows: column counts differ, {a.value.shape} vs {b.value.shape}"
        )
    na = a.value.shape[0]

    def bwd(g):
        return g[:na], g[na:]

    return DiffNode(np.concatenate([a.value, b.value], axis=0), (a, b), bwd)


def concat_cols(parts) -> DiffNode:
    parts = [as_node(p) for p in parts]
    if not parts:
        raise ContractError("concat_cols: empty part list")
    rows = parts[0].value.shape[0]
    for p in parts:
        if p.value.shape[0] != rows:
            raise ShapeError(
                f"concat_cols: row counts differ, {parts[0].value.shape} vs {p.value.shape}"
            )
    widths = [p.value.shape[1] for p in parts]
    edges = np.cumsum([0] + widths)

    def bwd(g):
        return tuple(g[:, edges[i]:edges[i + 1]] for i in range(len(parts)))

    return DiffNode(np.concatenate([p.value for p in parts], axis=1), parts, bwd)


def slice_cols(a, start: int, stop: int) -> DiffNode:
    a = as_node(a)
    cols = a.value.shape[1]
    if not (0 <= start < stop <= cols):
        raise ShapeError(f"slice_cols: [{start}:{stop}] out of range for {cols} columns")

    def bwd(g):
        da = np.zeros_like(a.value)
        da[:, start:stop] = g
        return (da,)

    return DiffNode(a.value[:, start:stop].copy(), (a,), bwd)


def attn_mix(attn, values) -> DiffNode:
    """Rows of `attn` (queries x keys) weight rows of `values` (keys x d).
    Equivalent to attn @ values, but each output entry accumulates its key
    contributions in canonical order, so permuting keys consistently in both
    operands is bitwise invisible."""
    attn, values = as_node(attn), as_node(values)
    av, vv = attn.value, values.value
    if av.shape[1] != vv.shape[0]:
        raise ShapeError(f"attn_mix: key counts differ, {av.shape} x {vv.shape}")
    contrib = av[:, :, None] * vv[None, :, :]
    out = np.sum(np.sort(contrib, axis=1), axis=1)

    def bwd(g):
        return g @ vv.T, av.T @ g

    return DiffNode(out, (attn, values), bwd)


def sum_all(a) -> DiffNode:
    """Sum of every entry, as a 1x1 node, in canonical order."""
    a = as_node(a)
    flat = np.sort(a.value, axis=None)
    out = np.array([[np.sum(flat)]], dtype=a.value.dtype)

    def bwd(g):
        return (np.full_like(a.value, g[0, 0]),)

    return DiffNode(out, (a,), bwd)
