"""Embedding, LSTM, BiLSTM, linear and dropout layers plus the Adam optimizer."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autograd as ag
from .errors import NumericError


def glorot(rng, fan_out, fan_in):
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=(fan_out, fan_in))


class EmbeddingTable:
    """``vocab_size x dim`` lookup table; row 0 is the UNK vector."""

    def __init__(self, vocab_size, dim, rng=None, weights=None):
        if weights is None:
            rng = rng or np.random.default_rng(0)
            weights = rng.uniform(-0.05, 0.05, size=(vocab_size, dim))
        self.weights = ag.parameter(weights)

    @property
    def vocab_size(self):
        return self.weights.shape[0]

    @property
    def dim(self):
        return self.weights.shape[1]


def embed(table, index):
    """Look up one row (``int``) or a sequence of rows (``L x dim``)."""
    idx = np.asarray(index)
    if idx.size and (idx.min() < 0 or idx.max() >= table.vocab_size):
        raise IndexError(f"embedding index out of range for vocab size {table.vocab_size}")
    return ag.embedding_row_select(table.weights, idx)


class LstmParams:
    """Gate blocks are stacked in the order input, forget, cell, output."""

    def __init__(self, input_dim, hidden, rng=None, forget_bias=1.0, W=None, U=None, b=None):
        rng = rng or np.random.default_rng(0)
        if W is None:
            W = glorot(rng, 4 * hidden, input_dim)
        if U is None:
            U = glorot(rng, 4 * hidden, hidden)
        if b is None:
            b = np.zeros(4 * hidden)
            b[hidden:2 * hidden] = forget_bias
        self.W = ag.parameter(W)
        self.U = ag.parameter(U)
        self.b = ag.parameter(b)
        if self.W.shape != (4 * hidden, input_dim) or self.U.shape != (4 * hidden, hidden) \
                or self.b.shape != (4 * hidden,):
            raise ag.ShapeError("LSTM parameter shapes inconsistent with dimensions")

    @property
    def hidden(self):
        return self.U.shape[1]

    @property
    def input_dim(self):
        return self.W.shape[1]

    def parameters(self):
        return {"W": self.W, "U": self.U, "b": self.b}


def _cell(p, pre, h_prev, c_prev):
    # pre: input projection plus bias for this step, shape [4*hidden]
    n = p.hidden
    z = ag.add(pre, ag.matmul(p.U, h_prev))
    gates = ag.sigmoid(z)
    i = ag.index(gates, slice(0, n))
    f = ag.index(gates, slice(n, 2 * n))
    o = ag.index(gates, slice(3 * n, 4 * n))
    g = ag.tanh(ag.index(z, slice(2 * n, 3 * n)))
    c = ag.add(ag.mul(f, c_prev), ag.mul(i, g))
    h = ag.mul(o, ag.tanh(c))
    return h, c


def lstm_step(p, x_t, h_prev, c_prev):
    """One LSTM step; returns ``(h_t, c_t)``."""
    if x_t.shape != (p.input_dim,) or h_prev.shape != (p.hidden,) or c_prev.shape != (p.hidden,):
        raise ag.ShapeError(
            f"lstm_step: x {x_t.shape}, h {h_prev.shape}, c {c_prev.shape} "
            f"for input {p.input_dim}, hidden {p.hidden}")
    return _cell(p, ag.add(ag.matmul(p.W, x_t), p.b), h_prev, c_prev)


def _sig(x):
    # overflow-free logistic in one ufunc call
    return 0.5 * np.tanh(0.5 * x) + 0.5


def lstm_sequence(proj, U, reverse=False):
    """Run an LSTM over pre-projected inputs as a single taped primitive.

    ``proj`` is ``L x 4h`` (input projection plus bias per position) and
    ``U`` the ``4h x h`` recurrent matrix; returns the ``L x h`` hidden states
    in position order.  Equivalent to chaining :func:`lstm_step`, but the
    reverse pass is hand-written so the recurrent-weight gradient is one
    matmul instead of one outer product per step.
    """
    P, Uv = proj.value, U.value
    L, four_h = P.shape
    n = Uv.shape[1]
    if four_h != 4 * n or Uv.shape[0] != 4 * n:
        raise ag.ShapeError(f"lstm_sequence: proj {P.shape} vs U {Uv.shape}")
    order = np.arange(L - 1, -1, -1) if reverse else np.arange(L)
    acts = np.empty((L, 4 * n))
    cs = np.empty((L, n))
    tcs = np.empty((L, n))
    hs = np.empty((L, n))
    h_prev_all = np.empty((L, n))
    c_prev_all = np.empty((L, n))
    h = np.zeros(n)
    c = np.zeros(n)
    for t in order:
        z = P[t] + Uv @ h
        a = acts[t]
        a[:2 * n] = _sig(z[:2 * n])
        a[2 * n:3 * n] = np.tanh(z[2 * n:3 * n])
        a[3 * n:] = _sig(z[3 * n:])
        h_prev_all[t] = h
        c_prev_all[t] = c
        c = a[n:2 * n] * c + a[:n] * a[2 * n:3 * n]
        tc = np.tanh(c)
        h = a[3 * n:] * tc
        cs[t], tcs[t], hs[t] = c, tc, h

    def bw(gH):
        dZ = np.empty((L, 4 * n))
        dh_next = np.zeros(n)
        dc_next = np.zeros(n)
        for t in order[::-1]:
            a = acts[t]
            i, f, g, o = a[:n], a[n:2 * n], a[2 * n:3 * n], a[3 * n:]
            dh = gH[t] + dh_next
            tc = tcs[t]
            dc = dh * o * (1.0 - tc * tc) + dc_next
            dz = dZ[t]
            dz[:n] = dc * g * i * (1.0 - i)
            dz[n:2 * n] = dc * c_prev_all[t] * f * (1.0 - f)
            dz[2 * n:3 * n] = dc * i * (1.0 - g * g)
            dz[3 * n:] = dh * tc * o * (1.0 - o)
            dc_next = dc * f
            dh_next = Uv.T @ dz
        return dZ, dZ.T @ h_prev_all

    return ag.record(hs, "lstm_sequence", (proj, U), bw)


def _run(p, xs_matrix, reverse):
    proj = ag.add(ag.matmul(xs_matrix, ag.transpose(p.W)), p.b)
    return lstm_sequence(proj, p.U, reverse)


def _as_matrix(fwd, bwd, xs):
    if isinstance(xs, ag.Node):
        mat = xs
    else:
        if not xs:
            raise ValueError("bilstm: empty sequence")
        mat = ag.stack(xs)
    if mat.value.ndim != 2 or mat.shape[0] == 0:
        raise ValueError(f"bilstm: expected a non-empty L x d input, got {mat.shape}")
    if mat.shape[1] != fwd.input_dim or mat.shape[1] != bwd.input_dim:
        raise ag.ShapeError(f"bilstm: input {mat.shape} vs LSTM input dim {fwd.input_dim}")
    return mat


def bilstm_matrix(fwd, bwd, xs):
    """BiLSTM outputs as one ``L x 2h`` node (forward half first)."""
    mat = _as_matrix(fwd, bwd, xs)
    return ag.concat([_run(fwd, mat, False), _run(bwd, mat, True)], axis=1)


def bilstm(fwd, bwd, xs):
    """Run both directions over ``xs`` and concatenate per position.

    ``xs`` is a list of ``[input]`` nodes or one ``L x input`` node.  Returns
    a list of ``[2*hidden]`` nodes.
    """
    out = bilstm_matrix(fwd, bwd, xs)
    return [ag.index(out, t) for t in range(out.shape[0])]


class LinearParams:
    def __init__(self, in_dim, out_dim, rng=None, W=None, b=None):
        rng = rng or np.random.default_rng(0)
        self.W = ag.parameter(glorot(rng, out_dim, in_dim) if W is None else W)
        self.b = ag.parameter(np.zeros(out_dim) if b is None else b)
        if self.W.shape != (out_dim, in_dim) or self.b.shape != (out_dim,):
            raise ag.ShapeError("linear parameter shapes inconsistent with dimensions")

    def parameters(self):
        return {"W": self.W, "b": self.b}


def linear(p, x):
    """``W x + b`` for a vector, or row-wise ``X W^T + b`` for an ``L x in`` matrix."""
    if x.value.ndim == 1:
        return ag.add(ag.matmul(p.W, x), p.b)
    return ag.add(ag.matmul(x, ag.transpose(p.W)), p.b)


def dropout(x, rate, rng, training):
    """Inverted dropout: survivors are scaled by ``1/(1-rate)``."""
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    if not training or rate == 0.0:
        return x
    keep = rng.random(x.shape) >= rate
    return ag.mul(x, ag.constant(keep / (1.0 - rate)))


def dropout_schedule(epoch, max_epochs, base):
    """Dropout rate decayed linearly from ``base`` at epoch 0 to 0 at ``max_epochs``."""
    if max_epochs <= 0:
        raise ValueError("max_epochs must be positive")
    if not 0 <= epoch <= max_epochs:
        raise ValueError(f"epoch {epoch} outside [0, {max_epochs}]")
    return base * (1.0 - epoch / max_epochs)


@dataclass
class AdamState:
    alpha: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_step(state, params, grads):
    """Apply one Adam update in place.

    ``params`` and ``grads`` map names to arrays; a missing gradient counts
    as zero.  Returns ``params``.
    """
    for name, g in grads.items():
        if g is not None and not np.all(np.isfinite(g)):
            raise NumericError(f"non-finite gradient for parameter {name!r}")
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** state.t
    c2 = 1.0 - b2 ** state.t
    for name, theta in params.items():
        g = grads.get(name)
        if g is None:
            g = np.zeros_like(theta)
        if g.shape != theta.shape:
            raise ag.ShapeError(f"adam: gradient shape {g.shape} != parameter {theta.shape} ({name})")
        m = state.m.get(name)
        if m is None:
            m = state.m[name] = np.zeros_like(theta)
            state.v[name] = np.zeros_like(theta)
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        theta -= state.alpha * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return params
