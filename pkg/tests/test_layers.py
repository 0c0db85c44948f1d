import numpy as np
import pytest

from esimrank import autodiff as ad
from esimrank.autodiff import ParamStore, Tensor, gradient_check
from esimrank.layers import BiLSTMParams, bilstm, bilstm_many, lstm_scan, make_bilstm, make_lstm


@pytest.fixture
def params():
    store = ParamStore(seed=0, init_scale=0.5)
    return store, make_bilstm(store, "enc", 3, 4)


def test_forget_bias_is_one():
    store = ParamStore()
    p = make_lstm(store, "l", 2, 3)
    assert p.b.value.tolist() == [0] * 3 + [1] * 3 + [0] * 6


def test_shapes(params):
    _, p = params
    x = Tensor(np.random.default_rng(0).normal(size=(2, 5, 3)))
    out, last = bilstm(x, np.ones((2, 5), bool), p)
    assert out.shape == (2, 5, 8) and last.shape == (2, 8)
    with pytest.raises(ad.ShapeError):
        bilstm(Tensor(np.zeros((1, 0, 3))), np.ones((1, 0), bool), p)


def test_padding_does_not_change_results(params):
    _, p = params
    rng = np.random.default_rng(1)
    x = rng.normal(size=(1, 3, 3))
    out, last = bilstm(Tensor(x), np.ones((1, 3), bool), p)
    padded = np.concatenate([x, rng.normal(size=(1, 2, 3))], axis=1)
    out_p, last_p = bilstm(Tensor(padded), np.array([[True] * 3 + [False] * 2]), p)
    np.testing.assert_allclose(out_p.value[:, :3], out.value, atol=1e-14)
    np.testing.assert_allclose(last_p.value, last.value, atol=1e-14)


def test_reversal_swaps_directions(params):
    # reversing the input and swapping the two direction weights mirrors the outputs
    _, p = params
    x = np.random.default_rng(2).normal(size=(2, 4, 3))
    mask = np.ones((2, 4), bool)
    out, _ = bilstm(Tensor(x), mask, p)
    out_r, _ = bilstm(Tensor(x[:, ::-1].copy()), mask, BiLSTMParams(p.bwd, p.fwd))
    H = p.hidden
    np.testing.assert_allclose(out_r.value[:, ::-1, :H], out.value[:, :, H:], atol=1e-14)
    np.testing.assert_allclose(out_r.value[:, ::-1, H:], out.value[:, :, :H], atol=1e-14)


def test_bilstm_many_equals_separate_calls(params):
    _, p = params
    rng = np.random.default_rng(3)
    a = (Tensor(rng.normal(size=(2, 3, 3))), np.array([[1, 1, 0], [1, 1, 1]], bool))
    b = (Tensor(rng.normal(size=(1, 5, 3))), np.array([[1, 1, 1, 1, 0]], bool))
    joint = bilstm_many([a, b], p)
    for (x, m), (out, last) in zip([a, b], joint):
        ref_out, ref_last = bilstm(x, m, p)
        np.testing.assert_allclose(out.value, ref_out.value, atol=1e-14)
        np.testing.assert_allclose(last.value, ref_last.value, atol=1e-14)


def test_lstm_gradients(params):
    store, p = params
    x = Tensor(np.random.default_rng(4).normal(size=(2, 3, 3)))
    mask = np.array([[1, 1, 0], [1, 1, 1]], bool)
    assert gradient_check(lambda: ad.mean(ad.tanh(bilstm(x, mask, p)[0])), list(store)) < 1e-7


def test_reverse_final_is_position_zero(params):
    _, p = params
    x = Tensor(np.random.default_rng(5).normal(size=(1, 4, 3)))
    outs, final = lstm_scan(x, np.ones((1, 4), bool), p.bwd, reverse=True)
    np.testing.assert_array_equal(final.value, outs.value[:, 0])
