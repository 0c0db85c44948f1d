"""K-ESIM: ESIM with a third, external-knowledge stream.

Context, response and knowledge share the word-representation and encoder
weights.  Each unordered pair of streams is co-attended, giving every stream
two attended views.  All six (original, attended) pairs are enriched and run
through one shared aggregation BiLSTM; each is pooled to ``[max; last]``,
the two pools of a stream are summed, and the three stream vectors are
concatenated for the prediction layer.
"""
from __future__ import annotations

from dataclasses import dataclass


from . import autodiff as ad
from .autodiff import Tensor
from .corpus import Vocabulary
from .embedding import EmbeddingTable
from .esim import (
    ESIM,
    CoAttention,
    ModelConfig,
    PairBatch,
    Seq,
    _split_rows,
    bilstm_encode,
    co_attend,
    enrich,
    score,
)
from .layers import BiLSTMParams, bilstm_many, make_bilstm

STREAMS = ("context", "response", "knowledge")


@dataclass
class TripleEncoded:
    context: Seq
    response: Seq
    knowledge: Seq


@dataclass
class TripleAttended:
    """``views[(x, y)]`` is stream ``x`` attended over stream ``y``."""

    views: dict[tuple[str, str], Seq]
    attention: dict[tuple[str, str], CoAttention]

    def weight_sets(self) -> list[Tensor]:
        out = []
        for att in self.attention.values():
            out.extend([att.weights_a, att.weights_b])
        return out


def triple_co_attend(t: TripleEncoded) -> TripleAttended:
    streams = {"context": t.context, "response": t.response, "knowledge": t.knowledge}
    widths = {s.width for s in streams.values()}
    if len(widths) != 1:
        raise ad.ShapeError(f"triple_co_attend: stream widths differ {sorted(widths)}")
    views: dict[tuple[str, str], Seq] = {}
    attention: dict[tuple[str, str], CoAttention] = {}
    for x, y in (("context", "response"), ("context", "knowledge"), ("response", "knowledge")):
        att = co_attend(streams[x], streams[y])
        attention[(x, y)] = att
        views[(x, y)] = att.attended_a
        views[(y, x)] = att.attended_b
    return TripleAttended(views, attention)


def merge_pool(pools: dict[tuple[str, str], Tensor]) -> Tensor:
    """Add the two pooled views of each stream, concatenate streams in order."""
    merged = []
    for s in STREAMS:
        pair = [v for (x, _), v in pools.items() if x == s]
        if len(pair) != 2:
            raise ad.ShapeError(f"merge_pool: stream {s!r} has {len(pair)} views")
        if pair[0].shape != pair[1].shape:
            raise ad.ShapeError(f"merge_pool: view shapes {pair[0].shape} and {pair[1].shape} differ")
        merged.append(ad.add(pair[0], pair[1]))
    return ad.concat(merged, axis=-1)


def merge_pool_vector(views: TripleAttended, t: TripleEncoded, agg: BiLSTMParams) -> Tensor:
    streams = {"context": t.context, "response": t.response, "knowledge": t.knowledge}
    keys = list(views.views)
    enriched = [enrich(streams[x], views.views[(x, y)]) for x, y in keys]
    runs = bilstm_many([(e.values, e.mask) for e in enriched], agg)
    pools = {}
    for key, e, (out, last) in zip(keys, enriched, runs):
        pools[key] = ad.concat([ad.max_over_rows(out, e.mask), last], axis=-1)
    return merge_pool(pools)


def merge_pool_score(views: TripleAttended, t: TripleEncoded, agg: BiLSTMParams, mlp) -> Tensor:
    return score(merge_pool_vector(views, t, agg), mlp)


class KESIM(ESIM):
    variant = "kesim"

    def __init__(self, cfg: ModelConfig, vocab: Vocabulary,
                 tables: tuple[EmbeddingTable | None, EmbeddingTable | None] = (None, None)):
        super().__init__(cfg, vocab, tables)
        self.knowledge_encoder: BiLSTMParams | None = None
        if cfg.untie_knowledge_encoder:
            self.knowledge_encoder = make_bilstm(
                self.store, "knowledge_encoder", cfg.input_dim, cfg.hidden
            )

    @property
    def pooled_dim(self) -> int:
        return 12 * self.cfg.hidden

    def encode_triple(self, batch: PairBatch) -> TripleEncoded:
        if batch.knowledge is None:
            raise ValueError("K-ESIM batch has no knowledge sequences")
        nc, nr = len(batch.contexts), len(batch.responses)
        x, mask = self.embed(batch.contexts + batch.responses + batch.knowledge)
        if self.knowledge_encoder is None:
            enc = bilstm_encode(x, self.encoder, mask)
            values = enc.values
        else:
            shared = bilstm_encode(ad.getitem(x, (slice(0, nc + nr),)), self.encoder, mask[: nc + nr])
            know = bilstm_encode(ad.getitem(x, (slice(nc + nr, None),)), self.knowledge_encoder, mask[nc + nr:])
            values = ad.concat([shared.values, know.values], axis=0)
        ctx = _split_rows(values, mask, 0, nc)
        resp = _split_rows(values, mask, nc, nc + nr)
        know = _split_rows(values, mask, nc + nr, 2 * nc + nr)
        own = batch.owner
        return TripleEncoded(
            Seq(ad.take(ctx.values, own, axis=0), ctx.mask[own]),
            resp,
            Seq(ad.take(know.values, own, axis=0), know.mask[own]),
        )

    def pooled(self, batch: PairBatch) -> Tensor:
        t = self.encode_triple(batch)
        return merge_pool_vector(triple_co_attend(t), t, self.aggregator)
