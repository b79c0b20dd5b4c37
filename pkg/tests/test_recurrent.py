import numpy as np
import numpy.testing as npt
import pytest

from strokeseg.autodiff import Tensor
from strokeseg.gradcheck import finite_difference_check
from strokeseg.recurrent import LstmParams, layer_norm, lstm_step, run_lstm, xavier_init


def test_xavier_bounds_and_spread():
    rng = np.random.default_rng(0)
    w = xavier_init(40, 60, rng)
    limit = np.sqrt(6.0 / (40 + 60))
    assert w.shape == (40, 60)
    assert np.all(np.abs(w) <= limit)
    assert w.std() > 0.5 * limit / np.sqrt(3.0)


def test_layer_norm_standardizes_then_applies_affine():
    rng = np.random.default_rng(1)
    v = rng.normal(3.0, 2.5, size=(4, 8))
    out = layer_norm(Tensor(v), Tensor(np.ones(8)), Tensor(np.zeros(8))).data
    npt.assert_allclose(out.mean(axis=-1), 0.0, atol=1e-9)
    npt.assert_allclose(out.var(axis=-1), 1.0, rtol=1e-5)

    gain = np.full(8, 2.0)
    bias = np.full(8, -1.0)
    out2 = layer_norm(Tensor(v), Tensor(gain), Tensor(bias)).data
    npt.assert_allclose(out2, out * 2.0 - 1.0, rtol=1e-12)


def test_layer_norm_gradient():
    rng = np.random.default_rng(2)
    v = rng.standard_normal((2, 6))
    params = {"g": np.ones(6), "b": np.zeros(6)}

    def loss_fn(p):
        t = {k: Tensor(x, requires_grad=True) for k, x in p.items()}
        loss = (layer_norm(Tensor(v), t["g"], t["b"]) ** 3).sum()
        loss.backward()
        return loss.item(), {k: x.grad for k, x in t.items()}

    assert finite_difference_check(loss_fn, params) < 1e-6


def test_lstm_params_init_conventions():
    rng = np.random.default_rng(3)
    p = LstmParams.init(5, 7, rng)
    assert p.w_x.shape == (5, 28)
    assert p.w_h.shape == (7, 28)
    npt.assert_allclose(p.b, 0.0)
    npt.assert_allclose(p.ln_bf, 1.0)
    npt.assert_allclose(p.ln_bi, 0.0)
    npt.assert_allclose(p.ln_gf, 1.0)
    assert p.hidden_size == 7

    d = p.to_dict("enc")
    assert all(k.startswith("enc.") for k in d)
    p2 = LstmParams.from_dict({k: Tensor(v) for k, v in d.items()}, "enc")
    npt.assert_allclose(p2.w_x.data, p.w_x)


def _tensor_params(p):
    return LstmParams.from_dict(
        {k: Tensor(v, requires_grad=True) for k, v in p.to_dict("c").items()}, "c")


def test_lstm_step_zero_weights_give_zero_state():
    rng = np.random.default_rng(4)
    p = LstmParams.init(3, 4, rng)
    p.w_x[:] = 0.0
    p.w_h[:] = 0.0
    tp = _tensor_params(p)
    h0 = Tensor(np.zeros((2, 4)))
    c0 = Tensor(np.zeros((2, 4)))
    h1, c1 = lstm_step(tp, Tensor(np.ones((2, 3))), h0, c0)
    # All pre-activations are zero vectors, so layer norm leaves them at the
    # LN bias; candidate bias 0 gives tanh(0)=0 and the cell stays at 0.
    npt.assert_allclose(c1.data, 0.0, atol=1e-12)
    npt.assert_allclose(h1.data, 0.0, atol=1e-12)


def test_lstm_step_full_gradient():
    rng = np.random.default_rng(5)
    p = LstmParams.init(2, 3, rng)
    x = rng.standard_normal((2, 2))
    h0 = rng.standard_normal((2, 3))
    c0 = rng.standard_normal((2, 3))

    def loss_fn(raw):
        tp = LstmParams.from_dict(
            {k: Tensor(v, requires_grad=True) for k, v in raw.items()}, "c")
        h1, c1 = lstm_step(tp, Tensor(x), Tensor(h0), Tensor(c0))
        loss = (h1 * h1).sum() + c1.sum()
        loss.backward()
        return loss.item(), {k: t.grad for k, t in tp.to_dict("c").items()}

    assert finite_difference_check(loss_fn, p.to_dict("c")) < 1e-5


def test_recurrent_dropout_scales_candidate_only():
    rng = np.random.default_rng(6)
    p = LstmParams.init(2, 4, rng)
    tp = _tensor_params(p)
    x = Tensor(rng.standard_normal((1, 2)))
    h0 = Tensor(np.zeros((1, 4)))
    c0 = Tensor(np.zeros((1, 4)))
    _, c_keep = lstm_step(tp, x, h0, c0, dropout_mask=np.ones((1, 4)))
    _, c_drop = lstm_step(tp, x, h0, c0, dropout_mask=np.zeros((1, 4)))
    _, c_none = lstm_step(tp, x, h0, c0)
    npt.assert_allclose(c_keep.data, c_none.data, rtol=1e-12)
    # With the candidate fully masked and c0 = 0 the new cell must be zero.
    npt.assert_allclose(c_drop.data, 0.0, atol=1e-12)


def test_run_lstm_latches_state_on_masked_steps():
    rng = np.random.default_rng(7)
    p = LstmParams.init(3, 5, rng)
    tp = _tensor_params(p)
    xs = rng.standard_normal((2, 4, 3))
    mask = np.array([[1.0, 1.0, 0.0, 0.0],
                     [1.0, 1.0, 1.0, 1.0]])
    xs_masked = xs.copy()
    xs_masked[0, 2:] = 123.456  # garbage on padded steps must not leak
    h_full, _ = run_lstm(tp, xs, mask=mask)
    h_garbage, _ = run_lstm(tp, xs_masked, mask=mask)
    h_short, _ = run_lstm(tp, xs[:, :2], mask=mask[:, :2])
    npt.assert_allclose(h_full.data[0], h_short.data[0], rtol=1e-12)
    npt.assert_allclose(h_garbage.data[0], h_full.data[0], rtol=1e-12)
    assert not np.allclose(h_full.data[1], h_short.data[1])


def test_run_lstm_sequence_gradient():
    rng = np.random.default_rng(8)
    p = LstmParams.init(2, 3, rng)
    xs = rng.standard_normal((2, 3, 2))
    mask = np.array([[1.0, 1.0, 0.0], [1.0, 1.0, 1.0]])

    def loss_fn(raw):
        tp = LstmParams.from_dict(
            {k: Tensor(v, requires_grad=True) for k, v in raw.items()}, "c")
        h, c = run_lstm(tp, xs, mask=mask)
        loss = (h ** 2).sum() + c.sum()
        loss.backward()
        return loss.item(), {k: t.grad for k, t in tp.to_dict("c").items()}

    assert finite_difference_check(loss_fn, p.to_dict("c")) < 1e-5


def test_finite_difference_check_flags_wrong_gradient():
    params = {"w": np.array([1.0, 2.0])}

    def bad_fn(p):
        return float((p["w"] ** 2).sum()), {"w": 3.0 * p["w"]}

    assert finite_difference_check(bad_fn, params) > 0.1


def test_lstm_step_rejects_shape_mismatch():
    rng = np.random.default_rng(9)
    p = LstmParams.init(3, 4, rng)
    tp = _tensor_params(p)
    with pytest.raises(ValueError):
        lstm_step(tp, Tensor(np.ones((2, 5))), Tensor(np.zeros((2, 4))),
                  Tensor(np.zeros((2, 4))))
