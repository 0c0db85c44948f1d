import numpy as np
import pytest

from esimrank import autodiff as ad
from esimrank.autodiff import Tensor
from esimrank.corpus import build_vocabulary
from esimrank.esim import ModelConfig, Seq, example_batch, make_batch
from esimrank.harness.gradcheck import TINY, tiny_problem
from esimrank.kesim import KESIM, TripleEncoded, merge_pool, triple_co_attend
from helpers import make_example

EXAMPLES = [
    make_example("d1", ["grep fails"], [("a", "use grep -i"), ("b", "reboot")], {"a"},
                 knowledge=("grep", "prints", "lines")),
    make_example("d2", ["sound gone"], [("a", "alsamixer"), ("b", "grep")], {"a"}),
]


@pytest.fixture(scope="module")
def model():
    return KESIM(ModelConfig(variant="kesim", **TINY), build_vocabulary(EXAMPLES))


def test_merged_width_is_12h(model):
    b = make_batch([(ex, c) for ex in EXAMPLES for c in ex.candidates], model.cfg)
    assert model.pooled(b).shape == (4, 12 * TINY["hidden"])
    assert model.pooled_dim == 12 * TINY["hidden"]


def test_default_merged_width_2400():
    cfg = ModelConfig(variant="kesim")
    assert 3 * 4 * cfg.hidden == 2400
    pools = {(x, y): Tensor(np.ones((1, 4 * cfg.hidden)))
             for x, y in [("context", "response"), ("response", "context"), ("context", "knowledge"),
                          ("knowledge", "context"), ("response", "knowledge"), ("knowledge", "response")]}
    assert merge_pool(pools).shape == (1, 2400)


def test_merge_pool_sums_views_in_stream_order():
    v = lambda x: Tensor(np.array([[x]]))
    pools = {("context", "response"): v(1.0), ("context", "knowledge"): v(2.0),
             ("response", "context"): v(10.0), ("response", "knowledge"): v(20.0),
             ("knowledge", "context"): v(100.0), ("knowledge", "response"): v(200.0)}
    assert merge_pool(pools).value.tolist() == [[3.0, 30.0, 300.0]]
    del pools[("knowledge", "response")]
    with pytest.raises(ad.ShapeError):
        merge_pool(pools)


def test_six_attention_matrices_are_stochastic(model):
    t = model.encode_triple(example_batch(EXAMPLES[0], model.cfg))
    att = triple_co_attend(t)
    ws = att.weight_sets()
    assert len(ws) == 6 and len(att.views) == 6
    for w in ws:
        np.testing.assert_allclose(w.value.sum(axis=-1), 1.0, atol=1e-12)


def test_missing_knowledge_becomes_pad(model):
    b = example_batch(EXAMPLES[1], model.cfg)
    assert b.knowledge == [["<pad>"]]
    assert np.all(np.isfinite(model.forward(b).value))


def test_width_mismatch_rejected():
    s = lambda w: Seq(Tensor(np.ones((1, 2, w))), np.ones((1, 2), bool))
    with pytest.raises(ad.ShapeError):
        triple_co_attend(TripleEncoded(s(4), s(4), s(6)))


def test_untied_knowledge_encoder():
    m = KESIM(ModelConfig(variant="kesim", untie_knowledge_encoder=True, **TINY), build_vocabulary(EXAMPLES))
    assert "knowledge_encoder.fwd.W" in m.store
    assert m.score_example(EXAMPLES[0]).shape == (2,)


@pytest.mark.parametrize("untie", [False, True])
def test_tiny_kesim_gradients(untie):
    model, batch = tiny_problem("kesim", untie=untie)
    assert ad.gradient_check(lambda: model.loss(batch), list(model.store)) < 1e-6
