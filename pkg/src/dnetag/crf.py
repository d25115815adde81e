"""Linear-chain CRF over the five IOB2 tags."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autograd as ag
from .corpus import NUM_TAGS, Tag

K = NUM_TAGS


class CrfParams:
    """Transition scores ``[prev, cur]`` plus start and end score vectors."""

    def __init__(self, transitions=None, start=None, end=None, n_tags=K):
        self.transitions = ag.parameter(np.zeros((n_tags, n_tags)) if transitions is None else transitions)
        self.start = ag.parameter(np.zeros(n_tags) if start is None else start)
        self.end = ag.parameter(np.zeros(n_tags) if end is None else end)

    @property
    def n_tags(self):
        return self.start.shape[0]

    def parameters(self):
        return {"transitions": self.transitions, "start": self.start, "end": self.end}


@dataclass(frozen=True)
class ConstraintMask:
    trans_allowed: np.ndarray
    start_allowed: np.ndarray
    end_allowed: np.ndarray

    def additive(self):
        """``(trans, start, end)`` arrays holding 0 where allowed and -inf elsewhere."""
        def neg(a):
            return np.where(a, 0.0, -np.inf)
        return neg(self.trans_allowed), neg(self.start_allowed), neg(self.end_allowed)

    def allows(self, tags):
        tags = [int(t) for t in tags]
        if not self.start_allowed[tags[0]] or not self.end_allowed[tags[-1]]:
            return False
        return all(self.trans_allowed[a, b] for a, b in zip(tags, tags[1:]))


def build_constraint_mask():
    """IOB2 legality: ``I-X`` only at the start of nothing and only after ``B-X``/``I-X``."""
    trans = np.ones((K, K), dtype=bool)
    trans[:, Tag.I_P] = False
    trans[[Tag.B_P, Tag.I_P], Tag.I_P] = True
    trans[:, Tag.I_N] = False
    trans[[Tag.B_N, Tag.I_N], Tag.I_N] = True
    start = np.ones(K, dtype=bool)
    start[[Tag.I_P, Tag.I_N]] = False
    return ConstraintMask(trans, start, np.ones(K, dtype=bool))


def _as_node(e):
    return e if isinstance(e, ag.Node) else ag.constant(e)


def sequence_score(e, p, tags):
    """Unnormalized score of one tag path as a scalar node."""
    e = _as_node(e)
    L = e.shape[0]
    if len(tags) != L:
        raise ValueError(f"sequence_score: {len(tags)} tags for {L} positions")
    y = np.asarray([int(t) for t in tags], dtype=np.intp)
    parts = [
        ag.sum(ag.index(e, (np.arange(L), y))),
        ag.index(p.start, int(y[0])),
        ag.index(p.end, int(y[-1])),
    ]
    if L > 1:
        parts.append(ag.sum(ag.index(p.transitions, (y[:-1], y[1:]))))
    total = parts[0]
    for part in parts[1:]:
        total = ag.add(total, part)
    return total


def _lse(x, axis):
    m = np.max(x, axis=axis, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    with np.errstate(divide="ignore"):
        out = np.log(np.sum(np.exp(x - m), axis=axis, keepdims=True)) + m
    return np.squeeze(out, axis=axis)


def log_partition(e, p, mask=None):
    """log Z by the forward algorithm, taped as one node.

    The gradient comes from forward-backward marginals: node marginals for
    the emissions, start and end scores, pair marginals for the
    transitions.  Masked moves get probability zero.
    """
    e = _as_node(e)
    ev = e.value
    L, n = ev.shape
    trans, start, end = p.transitions.value, p.start.value, p.end.value
    if mask is not None:
        mt, ms, me = mask.additive()
        trans, start, end = trans + mt, start + ms, end + me
    alpha = np.empty((L, n))
    alpha[0] = start + ev[0]
    for t in range(1, L):
        alpha[t] = _lse(alpha[t - 1][:, None] + trans, axis=0) + ev[t]
    logz = float(_lse(alpha[-1] + end, axis=0))

    def bw(g):
        beta = np.empty((L, n))
        beta[-1] = end
        for t in range(L - 2, -1, -1):
            beta[t] = _lse(trans + (ev[t + 1] + beta[t + 1])[None, :], axis=1)
        node = np.exp(alpha + beta - logz)
        pair = np.zeros((n, n))
        for t in range(L - 1):
            pair += np.exp(alpha[t][:, None] + trans + (ev[t + 1] + beta[t + 1])[None, :] - logz)
        return g * node, g * pair, g * node[0], g * node[-1]

    return ag.record(np.array(logz), "crf_log_partition", (e, p.transitions, p.start, p.end), bw)


def log_partition_composed(e, p, mask=None):
    """Forward algorithm built from autograd primitives (reference for the fused node)."""
    e = _as_node(e)
    L, n = e.shape
    trans, start, end = p.transitions, p.start, p.end
    if mask is not None:
        mt, ms, me = mask.additive()
        trans = ag.add(trans, ag.constant(mt))
        start = ag.add(start, ag.constant(ms))
        end = ag.add(end, ag.constant(me))
    alpha = ag.add(start, ag.index(e, 0))
    for t in range(1, L):
        scores = ag.add(ag.reshape(alpha, (n, 1)), trans)
        alpha = ag.add(ag.logsumexp(scores, axis=0), ag.index(e, t))
    return ag.logsumexp(ag.add(alpha, end))


def nll(e, p, gold, mask=None):
    """Negative log-likelihood of ``gold``; ``mask`` restricts the partition sum."""
    if mask is not None and not mask.allows(gold):
        raise ValueError("gold tag sequence is forbidden by the constraint mask")
    return ag.sub(log_partition(e, p, mask), sequence_score(e, p, gold))


def viterbi(e, p, mask=None):
    """Best path and its score.

    Ties go to the lowest tag index, both for the final tag and for every
    back-pointer.
    """
    ev = e.value if isinstance(e, ag.Node) else np.asarray(e, dtype=np.float64)
    trans = p.transitions.value
    start = p.start.value
    end = p.end.value
    if mask is not None:
        mt, ms, me = mask.additive()
        trans, start, end = trans + mt, start + ms, end + me
    L = ev.shape[0]
    delta = start + ev[0]
    back = np.zeros((L, ev.shape[1]), dtype=np.intp)
    for t in range(1, L):
        cand = delta[:, None] + trans
        back[t] = np.argmax(cand, axis=0)
        delta = cand[back[t], np.arange(ev.shape[1])] + ev[t]
    best = int(np.argmax(delta + end))
    path = [best]
    for t in range(L - 1, 0, -1):
        path.append(int(back[t, path[-1]]))
    path.reverse()
    tags = [Tag(i) for i in path]
    with ag.no_grad():
        score = float(sequence_score(ev, p, tags).value)
    return tags, score
