import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from esimrank import autodiff as ad
from esimrank.autodiff import ParamStore, Tensor
from esimrank.corpus import build_vocabulary
from esimrank.esim import (
    ESIM,
    ModelConfig,
    Seq,
    aggregate_and_pool,
    bce_loss,
    bilstm_encode,
    co_attend,
    enrich,
    example_batch,
    make_batch,
    score,
)
from esimrank.harness.gradcheck import TINY, tiny_problem
from esimrank.harness.modelio import load_model, save_model
from esimrank.layers import make_bilstm
from helpers import make_example

EXAMPLES = [
    make_example("d1", ["my wifi drops", "which card"], [("a", "reload iwlwifi"), ("b", "buy a mouse"), ("c", "ok")], {"a"}),
    make_example("d2", ["no sound"], [("a", "unmute alsamixer"), ("b", "reload iwlwifi")], {"a"}),
]


@pytest.fixture(scope="module")
def tiny():
    cfg = ModelConfig(**TINY)
    return ESIM(cfg, build_vocabulary(EXAMPLES))


def test_config_validation():
    with pytest.raises(ValueError):
        ModelConfig(hidden=0)
    with pytest.raises(ValueError):
        ModelConfig(variant="bert")
    assert ModelConfig().input_dim == 480


def test_dimension_chain_default():
    cfg = ModelConfig()
    store = ParamStore(init_scale=cfg.init_scale)
    enc = make_bilstm(store, "e", cfg.input_dim, cfg.hidden)
    agg = make_bilstm(store, "g", 8 * cfg.hidden, cfg.hidden)
    rng = np.random.default_rng(0)
    a = bilstm_encode(Tensor(rng.normal(size=(1, 3, 480))), enc)
    b = bilstm_encode(Tensor(rng.normal(size=(1, 2, 480))), enc)
    assert a.width == 400
    att = co_attend(a, b)
    m_a, m_b = enrich(a, att.attended_a), enrich(b, att.attended_b)
    assert m_a.width == 1600
    assert agg.fwd.W.shape == (1600, 4 * 200)
    v = aggregate_and_pool(m_a, m_b, agg)
    assert v.shape == (1, 1600)


def test_attention_masks_and_shapes():
    rng = np.random.default_rng(1)
    a = Seq(Tensor(rng.normal(size=(2, 3, 4))), np.array([[1, 1, 0], [1, 1, 1]], bool))
    b = Seq(Tensor(rng.normal(size=(2, 2, 4))), np.array([[1, 0], [1, 1]], bool))
    att = co_attend(a, b)
    assert att.weights_a.shape == (2, 3, 2) and att.weights_b.shape == (2, 2, 3)
    assert np.all(att.weights_a.value[0, :, 1] == 0)
    assert np.all(att.weights_b.value[0, :, 2] == 0)
    with pytest.raises(ad.ShapeError):
        co_attend(a, Seq(Tensor(np.ones((2, 2, 5))), np.ones((2, 2), bool)))


def test_enrich_shape_mismatch():
    a = Seq(Tensor(np.ones((1, 3, 4))), np.ones((1, 3), bool))
    with pytest.raises(ad.ShapeError):
        enrich(a, Seq(Tensor(np.ones((1, 2, 4))), np.ones((1, 2), bool)))
    e = enrich(a, Seq(Tensor(np.full((1, 3, 4), 2.0)), np.ones((1, 3), bool)))
    assert e.values.value[0, 0].tolist() == [1] * 4 + [2] * 4 + [-1] * 4 + [2] * 4


def test_bce_clamps_and_validates():
    p = Tensor(np.array([1.0, 0.0]))
    assert np.isfinite(bce_loss(p, [0, 1]).item())
    assert bce_loss(p, [0, 1]).item() == pytest.approx(-np.log(1e-12))
    with pytest.raises(ValueError):
        bce_loss(p, [0, 2])
    with pytest.raises(ad.ShapeError):
        bce_loss(p, [0])


def test_scores_are_probabilities(tiny):
    s = tiny.score_example(EXAMPLES[0])
    assert s.shape == (3,) and np.all((s > 0) & (s < 1))


def test_batching_matches_single_pairs(tiny):
    pairs = [(ex, c) for ex in EXAMPLES for c in ex.candidates]
    joint = tiny.forward(make_batch(pairs, tiny.cfg)).value
    single = [tiny.forward(make_batch([p], tiny.cfg)).value[0] for p in pairs]
    np.testing.assert_allclose(joint, single, atol=1e-13)


def test_context_shared_once_per_example(tiny):
    b = example_batch(EXAMPLES[0], tiny.cfg)
    assert len(b.contexts) == 1 and b.owner.tolist() == [0, 0, 0]
    assert b.labels.tolist() == [1, 0, 0]


def test_truncation_keeps_recent_context():
    cfg = ModelConfig(max_context_len=2, max_response_len=1, **TINY)
    b = example_batch(EXAMPLES[0], cfg)
    assert b.contexts[0] == ["card", "__eot__"]
    assert all(len(r) == 1 for r in b.responses)


def test_checkpoint_round_trip_scores(tiny, tmp_path):
    save_model(tiny, tmp_path / "m.ckpt")
    again = load_model(tmp_path / "m.ckpt")
    for ex in EXAMPLES:
        np.testing.assert_allclose(again.score_example(ex), tiny.score_example(ex), atol=1e-12, rtol=0)


def test_tiny_esim_gradients():
    model, batch = tiny_problem("esim")
    assert ad.gradient_check(lambda: model.loss(batch), list(model.store)) < 1e-6


def test_score_rejects_wrong_width(tiny):
    with pytest.raises(ad.ShapeError):
        score(Tensor(np.ones((1, 3))), tiny.mlp)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 3), st.integers(1, 6), st.integers(1, 6), st.integers(0, 10**6))
def test_attention_rows_stochastic(batch, m, n, seed):
    rng = np.random.default_rng(seed)
    scale = rng.choice([0.1, 1.0, 20.0])
    la, lb = rng.integers(1, m + 1, size=batch), rng.integers(1, n + 1, size=batch)
    a = Seq(Tensor(scale * rng.normal(size=(batch, m, 4))), np.arange(m)[None] < la[:, None])
    b = Seq(Tensor(scale * rng.normal(size=(batch, n, 4))), np.arange(n)[None] < lb[:, None])
    att = co_attend(a, b)
    for w in (att.weights_a, att.weights_b):
        np.testing.assert_allclose(w.value.sum(axis=-1), 1.0, atol=1e-9)
