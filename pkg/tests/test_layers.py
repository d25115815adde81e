import numpy as np
import pytest

from dnetag import autograd as ag
from dnetag.errors import NumericError
from dnetag.layers import (AdamState, EmbeddingTable, LinearParams, LstmParams, adam_step, bilstm,
                           bilstm_matrix, dropout, dropout_schedule, embed, linear, lstm_sequence,
                           lstm_step)


def _reference_lstm(p, xs, reverse=False):
    h = ag.constant(np.zeros(p.hidden))
    c = ag.constant(np.zeros(p.hidden))
    order = range(len(xs) - 1, -1, -1) if reverse else range(len(xs))
    out = [None] * len(xs)
    for t in order:
        h, c = lstm_step(p, xs[t], h, c)
        out[t] = h
    return ag.stack(out)


def test_embed_rows_and_bounds():
    table = EmbeddingTable(4, 3, np.random.default_rng(0))
    assert np.abs(table.weights.value).max() <= 0.05
    np.testing.assert_array_equal(embed(table, [2, 0]).value, table.weights.value[[2, 0]])
    with pytest.raises(IndexError):
        embed(table, 4)


def test_embed_gradient():
    table = EmbeddingTable(5, 3, np.random.default_rng(1))
    w = np.random.default_rng(2).normal(size=(3, 3))
    err = ag.check_gradient(lambda ps: ag.sum(ag.mul(embed(table, [1, 4, 1]), ag.constant(w))),
                            [table.weights])
    assert err < 1e-7


def test_lstm_step_gradient():
    rng = np.random.default_rng(3)
    p = LstmParams(3, 4, rng)
    x = ag.parameter(rng.normal(size=3))
    h0 = ag.parameter(rng.normal(size=4))
    c0 = ag.parameter(rng.normal(size=4))

    def f(ps):
        h, c = lstm_step(p, ps[3], ps[4], ps[5])
        return ag.add(ag.sum(ag.mul(h, h)), ag.sum(c))

    assert ag.check_gradient(f, [p.W, p.U, p.b, x, h0, c0]) < 1e-7


def test_lstm_step_shape_error():
    p = LstmParams(3, 4)
    with pytest.raises(ag.ShapeError):
        lstm_step(p, ag.constant(np.zeros(2)), ag.constant(np.zeros(4)), ag.constant(np.zeros(4)))


def test_forget_bias_init():
    p = LstmParams(2, 3, forget_bias=1.0)
    np.testing.assert_array_equal(p.b.value, [0, 0, 0, 1, 1, 1, 0, 0, 0, 0, 0, 0])


@pytest.mark.parametrize("reverse", [False, True])
def test_fused_sequence_matches_stepwise(reverse):
    rng = np.random.default_rng(4)
    p = LstmParams(3, 4, rng)
    X = rng.normal(size=(5, 3))
    proj = ag.constant(X @ p.W.value.T + p.b.value)
    fused = lstm_sequence(proj, p.U, reverse)
    ref = _reference_lstm(p, [ag.constant(x) for x in X], reverse)
    np.testing.assert_allclose(fused.value, ref.value, atol=1e-14)


def test_fused_sequence_gradient():
    rng = np.random.default_rng(5)
    proj = ag.parameter(rng.normal(size=(4, 12)))
    U = ag.parameter(rng.normal(scale=0.5, size=(12, 3)))
    w = rng.normal(size=(4, 3))
    for reverse in (False, True):
        f = lambda ps: ag.sum(ag.mul(lstm_sequence(ps[0], ps[1], reverse), ag.constant(w)))  # noqa: E731
        assert ag.check_gradient(f, [proj, U]) < 1e-7


def test_bilstm_shapes_and_gradient():
    rng = np.random.default_rng(6)
    fwd, bwd = LstmParams(3, 2, rng), LstmParams(3, 2, rng)
    xs = ag.parameter(rng.normal(size=(4, 3)))
    outs = bilstm(fwd, bwd, [ag.index(xs, t) for t in range(4)])
    assert len(outs) == 4 and outs[0].shape == (4,)
    w = rng.normal(size=(4, 4))
    params = [xs] + list(fwd.parameters().values()) + list(bwd.parameters().values())
    assert ag.check_gradient(lambda ps: ag.sum(ag.mul(bilstm_matrix(fwd, bwd, xs), ag.constant(w))),
                             params) < 1e-7


def test_bilstm_backward_half_reads_right_context():
    rng = np.random.default_rng(7)
    fwd, bwd = LstmParams(2, 2, rng), LstmParams(2, 2, rng)
    a = rng.normal(size=(3, 2))
    b = a.copy()
    b[2] += 1.0
    oa, ob = bilstm_matrix(fwd, bwd, ag.constant(a)).value, bilstm_matrix(fwd, bwd, ag.constant(b)).value
    np.testing.assert_array_equal(oa[0, :2], ob[0, :2])
    assert not np.allclose(oa[0, 2:], ob[0, 2:])


def test_bilstm_empty_input():
    with pytest.raises(ValueError):
        bilstm(LstmParams(2, 2), LstmParams(2, 2), [])


def test_linear_gradient_vector_and_matrix():
    rng = np.random.default_rng(8)
    p = LinearParams(3, 5, rng)
    x = ag.parameter(rng.normal(size=3))
    X = ag.parameter(rng.normal(size=(2, 3)))
    assert ag.check_gradient(lambda ps: ag.sum(ag.tanh(linear(p, ps[2]))), [p.W, p.b, x]) < 1e-7
    assert ag.check_gradient(lambda ps: ag.sum(ag.tanh(linear(p, ps[2]))), [p.W, p.b, X]) < 1e-7


def test_dropout_inverted_scaling():
    x = ag.constant(np.ones(10000))
    y = dropout(x, 0.4, np.random.default_rng(0), training=True)
    kept = y.value[y.value > 0]
    np.testing.assert_allclose(kept, 1 / 0.6)
    assert abs(len(kept) / 10000 - 0.6) < 0.02
    assert dropout(x, 0.4, None, training=False) is x
    with pytest.raises(ValueError):
        dropout(x, 1.0, np.random.default_rng(0), True)


def test_dropout_schedule_linear_decay():
    assert dropout_schedule(0, 20, 0.5) == 0.5
    assert dropout_schedule(10, 20, 0.5) == 0.25
    assert dropout_schedule(20, 20, 0.5) == 0.0
    with pytest.raises(ValueError):
        dropout_schedule(21, 20, 0.5)


def test_adam_rejects_non_finite_gradient():
    with pytest.raises(NumericError):
        adam_step(AdamState(), {"w": np.zeros(2)}, {"w": np.array([1.0, np.nan])})


def test_adam_missing_gradient_is_zero():
    params = {"w": np.ones(2)}
    adam_step(AdamState(), params, {})
    np.testing.assert_array_equal(params["w"], [1.0, 1.0])


def test_adam_step_size_bounded_by_alpha():
    rng = np.random.default_rng(9)
    params = {"w": np.zeros(50)}
    adam_step(AdamState(alpha=0.01), params, {"w": rng.normal(size=50) * 1e3})
    assert np.abs(params["w"]).max() <= 0.01 + 1e-15
