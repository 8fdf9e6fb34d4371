"""Reverse-mode automatic differentiation over dense float64 arrays.

Only the primitives the encoder needs are provided. Every primitive records
itself on creation with a monotonically increasing sequence number, so the
recorded graph is a tape: `backward` replays adjoints in exact reverse
execution order, which keeps gradients bitwise deterministic.
"""

from __future__ import annotations

import itertools

import numpy as np

from .errors import ContractError, DimensionError, StructureError

_seq = itertools.count()


class Tensor:
    """Dense real array with an optional gradient slot."""

    __slots__ = ("data", "requires_grad", "grad", "op", "_parents", "_backward", "_seq")

    def __init__(self, data, requires_grad=False):
        self.data = np.array(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self.op = "leaf"
        self._parents = ()
        self._backward = None
        self._seq = next(_seq)

    @property
    def shape(self):
        return self.data.shape

    @property
    def size(self):
        return self.data.size

    def zero_grad(self):
        self.grad = None

    def numpy(self):
        return self.data

    def backward(self):
        backward(self)

    def __repr__(self):
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}, op={self.op}{flag})"

    # operator sugar for the few cases tests and the model use
    def __matmul__(self, other):
        return matmul(self, other)

    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    @property
    def T(self):
        return transpose(self)


def as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def _record(out_data, parents, backward_fn, op):
    out = Tensor.__new__(Tensor)
    out.data = out_data
    out.grad = None
    out.op = op
    out._seq = next(_seq)
    out.requires_grad = any(p.requires_grad for p in parents)
    if out.requires_grad:
        out._parents = tuple(parents)
        out._backward = backward_fn
    else:
        out._parents = ()
        out._backward = None
    return out


def _accum(t, g):
    if not t.requires_grad:
        return
    if t.grad is None:
        t.grad = np.array(g, dtype=np.float64, copy=True)
    else:
        t.grad += g


# ---------------------------------------------------------------- graph


class Graph:
    """Executed primitives reachable from a tensor, in execution order."""

    def __init__(self, nodes):
        self.nodes = list(nodes)

    def __len__(self):
        return len(self.nodes)

    def __iter__(self):
        return iter(self.nodes)

    @property
    def ops(self):
        return [n.op for n in self.nodes]


def trace(root):
    seen = set()
    nodes = []
    stack = [root]
    while stack:
        t = stack.pop()
        if id(t) in seen or t._backward is None:
            continue
        seen.add(id(t))
        nodes.append(t)
        stack.extend(t._parents)
    nodes.sort(key=lambda n: n._seq)
    return Graph(nodes)


def backward(loss, graph=None):
    """Populate ``.grad`` on every tensor with ``requires_grad`` reachable from ``loss``.

    Leaf gradients accumulate across calls; call ``zero_grad`` between steps.
    """
    if loss.data.size != 1:
        raise ContractError(f"backward needs a scalar loss, got shape {loss.shape}")
    if graph is None:
        graph = trace(loss)
    if not loss.requires_grad:
        return
    _accum(loss, np.ones_like(loss.data))
    for node in reversed(graph.nodes):
        if node.grad is not None:
            node._backward(node.grad)
    # free interior adjoints; leaves keep theirs
    for node in graph.nodes:
        node.grad = None if node is not loss else node.grad


# ---------------------------------------------------------------- primitives


def matmul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    if a.data.ndim != 2 or b.data.ndim != 2 or a.shape[1] != b.shape[0]:
        raise DimensionError(f"matmul shape mismatch: {a.shape} @ {b.shape}")

    def bw(g):
        if a.requires_grad:
            _accum(a, g @ b.data.T)
        if b.requires_grad:
            _accum(b, a.data.T @ g)

    return _record(a.data @ b.data, (a, b), bw, "matmul")


def transpose(x):
    x = as_tensor(x)

    def bw(g):
        _accum(x, g.T)

    return _record(np.ascontiguousarray(x.data.T), (x,), bw, "transpose")


def add(a, b):
    """Elementwise sum; a 1-D ``b`` is broadcast over the rows of ``a``."""
    a, b = as_tensor(a), as_tensor(b)
    row_bias = b.data.ndim == 1 and a.data.ndim == 2 and a.shape[1] == b.shape[0]
    if a.shape != b.shape and not row_bias:
        raise DimensionError(f"add shape mismatch: {a.shape} + {b.shape}")

    def bw(g):
        _accum(a, g)
        if b.requires_grad:
            _accum(b, g.sum(axis=0) if row_bias else g)

    return _record(a.data + b.data, (a, b), bw, "add")


def sub(a, b):
    a, b = as_tensor(a), as_tensor(b)
    if a.shape != b.shape:
        raise DimensionError(f"sub shape mismatch: {a.shape} - {b.shape}")

    def bw(g):
        _accum(a, g)
        if b.requires_grad:
            _accum(b, -g)

    return _record(a.data - b.data, (a, b), bw, "sub")


def scale(x, c):
    x = as_tensor(x)
    c = float(c)

    def bw(g):
        _accum(x, g * c)

    return _record(x.data * c, (x,), bw, "scale")


def mul_const(x, m):
    """Elementwise product with a constant (non-differentiable) array."""
    x = as_tensor(x)
    m = np.asarray(m, dtype=np.float64)
    try:
        out = x.data * m
    except ValueError:
        raise DimensionError(f"mul_const shape mismatch: {x.shape} * {m.shape}") from None
    if out.shape != x.shape:
        raise DimensionError(f"mul_const would broadcast {x.shape} to {out.shape}")

    def bw(g):
        _accum(x, g * m)

    return _record(out, (x,), bw, "mul_const")


def reshape(x, shape):
    x = as_tensor(x)
    try:
        out = x.data.reshape(shape)
    except ValueError:
        raise DimensionError(f"cannot reshape {x.shape} to {shape}") from None

    def bw(g):
        _accum(x, g.reshape(x.shape))

    return _record(out, (x,), bw, "reshape")


def tsum(x):
    x = as_tensor(x)

    def bw(g):
        _accum(x, np.broadcast_to(g, x.shape))

    return _record(np.array(x.data.sum()), (x,), bw, "sum")


def relu(x):
    x = as_tensor(x)
    mask = x.data > 0

    def bw(g):
        _accum(x, g * mask)

    return _record(np.where(mask, x.data, 0.0), (x,), bw, "relu")


def layer_norm(x, gamma, beta, eps=1e-5):
    x, gamma, beta = as_tensor(x), as_tensor(gamma), as_tensor(beta)
    n, d = x.shape
    if d < 1:
        raise DimensionError("layer_norm needs at least one feature column")
    if gamma.shape != (d,) or beta.shape != (d,):
        raise DimensionError(f"layer_norm gamma/beta must be ({d},), got {gamma.shape}, {beta.shape}")
    mu = x.data.mean(axis=1, keepdims=True)
    xc = x.data - mu
    var = (xc * xc).mean(axis=1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    out = xhat * gamma.data + beta.data

    def bw(g):
        if gamma.requires_grad:
            _accum(gamma, (g * xhat).sum(axis=0))
        if beta.requires_grad:
            _accum(beta, g.sum(axis=0))
        if x.requires_grad:
            gh = g * gamma.data
            dx = inv * (gh - gh.mean(axis=1, keepdims=True) - xhat * (gh * xhat).mean(axis=1, keepdims=True))
            _accum(x, dx)

    return _record(out, (x, gamma, beta), bw, "layer_norm")


def _check_groups(groups, n_rows, n_groups):
    groups = np.asarray(groups)
    if groups.ndim != 1 or groups.shape[0] != n_rows:
        raise DimensionError(f"group index of shape {groups.shape} does not match {n_rows} rows")
    if n_rows and (groups.min() < 0):
        raise StructureError(f"negative group id {groups.min()}")
    if n_groups is None:
        n_groups = int(groups.max()) + 1 if n_rows else 0
    counts = np.bincount(groups, minlength=n_groups) if n_rows else np.zeros(n_groups, int)
    if counts.shape[0] > n_groups:
        raise StructureError(f"group id {int(groups.max())} out of range for {n_groups} groups")
    empty = np.flatnonzero(counts == 0)
    if empty.size:
        raise StructureError(f"group {int(empty[0])} is empty")
    return groups.astype(np.intp), n_groups


def max_pool_groups(x, groups, n_groups=None):
    """Per-group elementwise maximum over member rows.

    Each output entry's gradient goes to exactly one member row, the lowest
    row index among ties.
    """
    x = as_tensor(x)
    groups, n_groups = _check_groups(groups, x.shape[0], n_groups)
    order = np.argsort(groups, kind="stable")
    starts = np.searchsorted(groups[order], np.arange(n_groups))
    xs = x.data[order]
    out = np.maximum.reduceat(xs, starts, axis=0)
    hit = xs == out[groups[order]]
    cand = np.where(hit, order[:, None], x.shape[0])
    argmax = np.minimum.reduceat(cand, starts, axis=0)

    def bw(g):
        dx = np.zeros_like(x.data)
        cols = np.broadcast_to(np.arange(x.shape[1]), argmax.shape)
        # argmax entries are unique per (group, column), so plain assignment is exact
        dx[argmax, cols] = g
        _accum(x, dx)

    return _record(out, (x,), bw, "max_pool_groups")


def gather_rows(x, index):
    x = as_tensor(x)
    index = np.asarray(index, dtype=np.intp)

    def bw(g):
        dx = np.zeros_like(x.data)
        np.add.at(dx, index, g)
        _accum(x, dx)

    return _record(x.data[index], (x,), bw, "gather_rows")


def concat(a, b):
    a, b = as_tensor(a), as_tensor(b)
    if a.shape[0] != b.shape[0]:
        raise DimensionError(f"concat row mismatch: {a.shape} vs {b.shape}")
    d1 = a.shape[1]

    def bw(g):
        _accum(a, g[:, :d1])
        _accum(b, g[:, d1:])

    return _record(np.concatenate([a.data, b.data], axis=1), (a, b), bw, "concat")


def softmax_rows(x, mask=None):
    """Row softmax. ``mask`` (boolean, same shape) marks the admissible entries;
    the rest receive probability exactly 0."""
    x = as_tensor(x)
    z = x.data
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != z.shape:
            raise DimensionError(f"softmax mask shape {mask.shape} != {z.shape}")
        if not mask.any(axis=1).all():
            raise StructureError("softmax row with no admissible entries")
        z = np.where(mask, z, -np.inf)
    e = np.exp(z - z.max(axis=1, keepdims=True))
    y = e / e.sum(axis=1, keepdims=True)

    def bw(g):
        _accum(x, y * (g - (g * y).sum(axis=1, keepdims=True)))

    return _record(y, (x,), bw, "softmax_rows")


def l2_normalize_rows(x, eps=1e-12):
    x = as_tensor(x)
    norm = np.sqrt((x.data * x.data).sum(axis=1, keepdims=True))
    denom = np.maximum(norm, eps)
    y = x.data / denom
    live = norm > eps

    def bw(g):
        proj = (y * g).sum(axis=1, keepdims=True)
        _accum(x, np.where(live, (g - y * proj) / denom, g / denom))

    return _record(y, (x,), bw, "l2_normalize_rows")


def huber(pred, target, delta=1.0):
    """Mean Huber loss over all elements."""
    pred, target = as_tensor(pred), as_tensor(target)
    if pred.shape != target.shape:
        raise DimensionError(f"huber shape mismatch: {pred.shape} vs {target.shape}")
    if delta <= 0:
        raise ValueError("huber delta must be positive")
    r = pred.data - target.data
    a = np.abs(r)
    quad = a <= delta
    n = max(r.size, 1)
    val = np.where(quad, 0.5 * r * r, delta * (a - 0.5 * delta)).sum() / n

    def bw(g):
        d = np.where(quad, r, delta * np.sign(r)) * (g / n)
        _accum(pred, d)
        _accum(target, -d)

    return _record(np.array(val), (pred, target), bw, "huber")


def gaussian_nll(pred_offsets, gt_offsets):
    """Negative log-likelihood of ``gt`` under unit isotropic Gaussians centred
    on ``pred``, constant dropped: ``0.5 * sum ||pred - gt||^2 / rows``."""
    pred, gt = as_tensor(pred_offsets), as_tensor(gt_offsets)
    if pred.shape != gt.shape:
        raise DimensionError(f"gaussian_nll shape mismatch: {pred.shape} vs {gt.shape}")
    rows = max(pred.shape[0], 1)
    r = pred.data - gt.data
    val = 0.5 * (r * r).sum() / rows

    def bw(g):
        d = r * (g / rows)
        _accum(pred, d)
        _accum(gt, -d)

    return _record(np.array(val), (pred, gt), bw, "gaussian_nll")
