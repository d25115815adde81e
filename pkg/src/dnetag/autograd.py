"""Minimal reverse-mode automatic differentiation over float64 numpy arrays.

Every primitive evaluates eagerly and records a closure that pushes the
upstream gradient back to its parents.  ``backward`` walks the recorded graph
in reverse topological order, accumulating gradients additively on fan-out.
"""

from __future__ import annotations

import contextlib

import numpy as np

__all__ = [
    "Node", "ShapeError", "apply_primitive", "backward", "check_gradient",
    "constant", "parameter", "no_grad",
    "add", "sub", "mul", "matmul", "concat", "stack", "index",
    "embedding_row_select", "sigmoid", "tanh", "logsumexp", "sum", "mean",
    "scale", "negate", "transpose", "reshape",
]

_GRAD_ENABLED = True


class ShapeError(ValueError):
    """Raised when a primitive receives incompatible input shapes."""


@contextlib.contextmanager
def no_grad():
    """Evaluate primitives without recording the graph (inference)."""
    global _GRAD_ENABLED
    prev = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = prev


class Node:
    """A value in the computation graph.

    ``grad`` stays ``None`` until something flows into it; ``zero_grad``
    resets it.  Leaf parameters are created with ``requires_grad=True``.
    """

    __slots__ = ("value", "grad", "op", "parents", "requires_grad", "_backward")

    def __init__(self, value, requires_grad=False, op="leaf", parents=(), backward_fn=None):
        self.value = np.asarray(value, dtype=np.float64)
        self.grad = None
        self.op = op
        self.parents = parents
        self.requires_grad = requires_grad
        self._backward = backward_fn

    @property
    def shape(self):
        return self.value.shape

    def zero_grad(self):
        self.grad = None

    def grad_or_zeros(self):
        return np.zeros_like(self.value) if self.grad is None else self.grad

    def __repr__(self):
        return f"Node(op={self.op}, shape={self.value.shape})"

    def __add__(self, other):
        return add(self, _lift(other))

    def __radd__(self, other):
        return add(_lift(other), self)

    def __sub__(self, other):
        return sub(self, _lift(other))

    def __rsub__(self, other):
        return sub(_lift(other), self)

    def __mul__(self, other):
        return mul(self, _lift(other))

    def __rmul__(self, other):
        return mul(_lift(other), self)

    def __matmul__(self, other):
        return matmul(self, _lift(other))

    def __neg__(self):
        return negate(self)

    def __getitem__(self, key):
        return index(self, key)


def constant(value):
    return Node(value)


def parameter(value):
    return Node(value, requires_grad=True)


def _lift(x):
    return x if isinstance(x, Node) else Node(x)


def record(value, op, parents, backward_fn):
    """Create an op result node, taping it only when a parent needs gradients."""
    if _GRAD_ENABLED and any(p.requires_grad for p in parents):
        return Node(value, True, op, parents, backward_fn)
    return Node(value, op=op)


def _unbroadcast(grad, shape):
    """Sum ``grad`` down to ``shape`` after numpy broadcasting."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


def _broadcast_shape(op, a, b):
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(f"{op}: incompatible shapes {a.shape} and {b.shape}") from None


# -- primitives ---------------------------------------------------------------

def add(a, b):
    _broadcast_shape("add", a, b)
    out = a.value + b.value

    def bw(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return record(out, "add", (a, b), bw)


def sub(a, b):
    _broadcast_shape("sub", a, b)
    out = a.value - b.value

    def bw(g):
        return _unbroadcast(g, a.shape), -_unbroadcast(g, b.shape)

    return record(out, "sub", (a, b), bw)


def mul(a, b):
    _broadcast_shape("mul", a, b)
    av, bv = a.value, b.value
    out = av * bv

    def bw(g):
        return _unbroadcast(g * bv, a.shape), _unbroadcast(g * av, b.shape)

    return record(out, "mul", (a, b), bw)


def matmul(a, b):
    """Matrix product for 2-D @ 2-D, 2-D @ 1-D and 1-D @ 2-D operands."""
    av, bv = a.value, b.value
    if av.ndim not in (1, 2) or bv.ndim not in (1, 2) or av.shape[-1] != bv.shape[0]:
        raise ShapeError(f"matmul: incompatible shapes {av.shape} and {bv.shape}")
    out = av @ bv

    def bw(g):
        if av.ndim == 2 and bv.ndim == 2:
            return g @ bv.T, av.T @ g
        if av.ndim == 2:
            return np.outer(g, bv), av.T @ g
        if bv.ndim == 2:
            return bv @ g, np.outer(av, g)
        return g * bv, g * av

    return record(out, "matmul", (a, b), bw)


def concat(nodes, axis=0):
    nodes = tuple(nodes)
    if not nodes:
        raise ShapeError("concat: no inputs")
    try:
        out = np.concatenate([n.value for n in nodes], axis=axis)
    except ValueError as exc:
        shapes = [n.shape for n in nodes]
        raise ShapeError(f"concat(axis={axis}): incompatible shapes {shapes}") from exc
    bounds = np.cumsum([n.shape[axis] for n in nodes])[:-1]

    def bw(g):
        return tuple(np.split(g, bounds, axis=axis))

    return record(out, "concat", nodes, bw)


def stack(nodes):
    """Stack equally shaped nodes along a new leading axis."""
    nodes = tuple(nodes)
    if not nodes:
        raise ShapeError("stack: no inputs")
    shapes = {n.shape for n in nodes}
    if len(shapes) != 1:
        raise ShapeError(f"stack: mismatched shapes {sorted(shapes)}")
    out = np.stack([n.value for n in nodes])

    def bw(g):
        return tuple(g)

    return record(out, "stack", nodes, bw)


def index(x, key):
    """Basic or integer-array indexing; gradients scatter-add back."""
    try:
        out = x.value[key]
    except IndexError as exc:
        raise ShapeError(f"slice: {exc} (shape {x.shape})") from exc
    shape = x.shape
    basic = _is_basic_key(key)

    def bw(g):
        full = np.zeros(shape)
        if basic:
            full[key] = g
        else:
            np.add.at(full, key, g)
        return (full,)

    return record(out, "slice", (x,), bw)


def _is_basic_key(key):
    parts = key if isinstance(key, tuple) else (key,)
    return all(isinstance(k, (int, np.integer, slice)) or k is None for k in parts)


def embedding_row_select(table, rows):
    """Select rows of a 2-D table by integer index (scalar or array)."""
    if table.value.ndim != 2:
        raise ShapeError(f"embedding_row_select: table must be 2-D, got {table.shape}")
    idx = np.asarray(rows, dtype=np.intp)
    n = table.shape[0]
    if idx.size and (idx.min() < 0 or idx.max() >= n):
        raise ShapeError(f"embedding_row_select: index out of range for {n} rows")
    out = table.value[idx]
    shape = table.shape

    def bw(g):
        full = np.zeros(shape)
        np.add.at(full, idx, g)
        return (full,)

    return record(out, "embedding_row_select", (table,), bw)


def sigmoid(x):
    # split form keeps exp from overflowing on large |x|
    v = x.value
    e = np.exp(-np.abs(v))
    out = np.where(v >= 0, 1.0 / (1.0 + e), e / (1.0 + e))

    def bw(g):
        return (g * out * (1.0 - out),)

    return record(out, "sigmoid", (x,), bw)


def tanh(x):
    out = np.tanh(x.value)

    def bw(g):
        return (g * (1.0 - out * out),)

    return record(out, "tanh", (x,), bw)


def logsumexp(x, axis=None):
    """Log-sum-exp with max subtraction; ``-inf`` entries get zero gradient."""
    v = x.value
    m = np.max(v, axis=axis, keepdims=True)
    finite_m = np.where(np.isfinite(m), m, 0.0)
    with np.errstate(divide="ignore"):
        s = np.sum(np.exp(v - finite_m), axis=axis, keepdims=True)
        lse_keep = np.log(s) + finite_m
    out = lse_keep if axis is None else np.squeeze(lse_keep, axis=axis)
    if axis is None:
        out = out.reshape(())

    def bw(g):
        gk = g if axis is None else np.expand_dims(g, axis)
        with np.errstate(invalid="ignore"):
            w = np.exp(v - lse_keep)
        w = np.where(np.isfinite(v), w, 0.0)
        return (w * gk,)

    return record(out, "logsumexp", (x,), bw)


def sum(x, axis=None):  # noqa: A001 - mirrors numpy naming
    v = x.value
    out = np.sum(v, axis=axis)
    shape = v.shape

    def bw(g):
        if axis is not None:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, shape).copy(),)

    return record(out, "sum", (x,), bw)


def mean(x, axis=None):
    v = x.value
    n = v.size if axis is None else v.shape[axis]
    out = np.mean(v, axis=axis)
    shape = v.shape

    def bw(g):
        if axis is not None:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g / n, shape).copy(),)

    return record(out, "mean", (x,), bw)


def scale(x, c):
    c = float(c)
    out = x.value * c

    def bw(g):
        return (g * c,)

    return record(out, "scale", (x,), bw)


def negate(x):
    def bw(g):
        return (-g,)

    return record(-x.value, "negate", (x,), bw)


def transpose(x):
    if x.value.ndim != 2:
        raise ShapeError(f"transpose: expected 2-D, got {x.shape}")

    def bw(g):
        return (g.T,)

    return record(x.value.T, "transpose", (x,), bw)


def reshape(x, shape):
    old = x.shape
    try:
        out = x.value.reshape(shape)
    except ValueError as exc:
        raise ShapeError(f"reshape: cannot reshape {old} to {shape}") from exc

    def bw(g):
        return (g.reshape(old),)

    return record(out, "reshape", (x,), bw)


_PRIMITIVES = {
    "add": add, "sub": sub, "mul": mul, "matmul": matmul, "concat": concat,
    "stack": stack, "slice": index, "embedding_row_select": embedding_row_select,
    "sigmoid": sigmoid, "tanh": tanh, "logsumexp": logsumexp, "sum": sum,
    "mean": mean, "scale": scale, "negate": negate, "transpose": transpose,
    "reshape": reshape,
}


def apply_primitive(op, inputs, **kwargs):
    """Apply a primitive by name, e.g. ``apply_primitive("mul", [a, b])``.

    ``concat`` and ``stack`` take the whole input list; every other primitive
    takes its inputs positionally.  Extra arguments (``axis``, ``key``, ``c``,
    ``shape``, ``rows``) are passed as keywords.
    """
    try:
        fn = _PRIMITIVES[op]
    except KeyError:
        raise ValueError(f"unknown primitive {op!r}") from None
    if op in ("concat", "stack"):
        return fn(inputs, **kwargs)
    return fn(*inputs, **kwargs)


# -- reverse pass ---------------------------------------------------------------

def _topo_order(root):
    order, seen = [], set()
    stack_ = [(root, False)]
    while stack_:
        node, expanded = stack_.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack_.append((node, True))
        for p in node.parents:
            if p.requires_grad and id(p) not in seen:
                stack_.append((p, False))
    return order


def backward(root):
    """Populate ``grad`` on every node reachable from the scalar ``root``.

    Gradients accumulate into existing ``grad`` arrays, so callers zero
    parameter gradients between steps.
    """
    if root.value.size != 1:
        raise ShapeError(f"backward: root must be scalar, got shape {root.shape}")
    if not root.requires_grad:
        return
    order = _topo_order(root)
    pending = {id(root): np.ones_like(root.value)}
    for node in reversed(order):
        g = pending.pop(id(node), None)
        if g is None:
            continue
        node.grad = g if node.grad is None else node.grad + g
        if node._backward is None:
            continue
        for parent, pg in zip(node.parents, node._backward(g)):
            if not parent.requires_grad:
                continue
            key = id(parent)
            prev = pending.get(key)
            pending[key] = pg if prev is None else prev + pg


def check_gradient(f, params, h=1e-5):
    """Max relative error between reverse-mode and central-difference gradients.

    ``f`` maps the list of parameter nodes to a scalar node and must be
    deterministic.  Parameters are perturbed in place and restored.
    """
    for p in params:
        p.zero_grad()
    backward(f(params))
    worst = 0.0
    for p in params:
        ad = p.grad_or_zeros()
        flat = p.value.reshape(-1)
        ad_flat = ad.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            with no_grad():
                up = float(f(params).value)
            flat[i] = orig - h
            with no_grad():
                down = float(f(params).value)
            flat[i] = orig
            fd = (up - down) / (2 * h)
            err = abs(ad_flat[i] - fd) / max(1.0, abs(ad_flat[i]), abs(fd))
            worst = max(worst, err)
    return worst
