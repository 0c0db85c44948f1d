"""ESIM response scorer: encode, co-attend, enrich, aggregate, pool, predict.

Everything is batched over (context, candidate) pairs.  A batch carries the
distinct contexts once; ``owner[k]`` says which context pair ``k`` belongs
to, so each context is encoded a single time however many candidates it has.
"""
from __future__ import annotations

from dataclasses import dataclass, field, fields
from typing import Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import ParamStore, Tensor
from .corpus import PAD, Candidate, Example, Vocabulary, truncate_context
from .embedding import EmbeddingConfig, EmbeddingTable, WordRepresentation
from .layers import BiLSTMParams, DenseParams, bilstm, bilstm_many, dense, make_bilstm, make_dense

BCE_EPS = 1e-12


@dataclass
class ModelConfig:
    variant: str = "esim"
    hidden: int = 200
    mlp_hidden: int = 256
    emb_dim_a: int = 300
    emb_dim_b: int = 100
    char_dim: int = 80
    char_emb_dim: int = 20
    max_word_chars: int = 20
    fine_tune_embeddings: bool = False
    max_context_len: int = 400
    max_response_len: int = 100
    knowledge_max_len: int = 200
    untie_knowledge_encoder: bool = False
    init_scale: float = 0.05
    seed: int = 0

    def __post_init__(self):
        if self.variant not in ("esim", "kesim"):
            raise ValueError(f"unknown variant {self.variant!r}")
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, (int, float)) and not isinstance(v, bool) and f.name != "seed" and v <= 0:
                raise ValueError(f"{f.name} must be positive, got {v}")

    @property
    def input_dim(self) -> int:
        return self.emb_dim_a + self.emb_dim_b + self.char_dim

    def embedding(self) -> EmbeddingConfig:
        return EmbeddingConfig(
            emb_dim_a=self.emb_dim_a,
            emb_dim_b=self.emb_dim_b,
            char_dim=self.char_dim,
            char_emb_dim=self.char_emb_dim,
            max_word_chars=self.max_word_chars,
            fine_tune=self.fine_tune_embeddings,
            seed=self.seed,
        )


@dataclass
class Seq:
    """A padded batch of sequences: ``values`` (B, T, D) with a (B, T) mask.

    Serves as the encoded (width 2h) and the enriched (width 8h) forms.
    """

    values: Tensor
    mask: np.ndarray
    final: Tensor | None = None

    @property
    def width(self) -> int:
        return self.values.shape[-1]


EncodedSeq = Seq
Enriched = Seq


@dataclass
class CoAttention:
    scores: Tensor  # E, (B, m, n)
    attended_a: Seq  # each context position as a mix of response rows
    attended_b: Seq  # each response position as a mix of context rows
    weights_a: Tensor  # softmax over n, (B, m, n)
    weights_b: Tensor  # softmax over m, (B, n, m)


def _as_batch(x: Tensor, mask: np.ndarray | None):
    if x.ndim == 2:
        x = ad.reshape(x, (1,) + x.shape)
        if mask is not None:
            mask = mask.reshape(1, -1)
    if mask is None:
        mask = np.ones(x.shape[:2], dtype=bool)
    return x, mask


def bilstm_encode(reprs: Tensor, params: BiLSTMParams, mask: np.ndarray | None = None) -> Seq:
    """Context-aware word vectors: row i is [forward state i; backward state i]."""
    if reprs.shape[-2] == 0:
        raise ad.ShapeError("bilstm_encode: zero-length input")
    x, mask = _as_batch(reprs, mask)
    out, last = bilstm(x, mask, params)
    return Seq(out, mask, last)


def co_attend(a_bar: Seq, b_bar: Seq) -> CoAttention:
    if a_bar.width != b_bar.width:
        raise ad.ShapeError(f"co_attend: widths {a_bar.width} and {b_bar.width} differ")
    E = ad.matmul(a_bar.values, ad.transpose(b_bar.values))
    # padded key positions get zero weight
    w_a = ad.softmax(E, b_bar.mask[:, None, :])
    w_b = ad.softmax(ad.transpose(E), a_bar.mask[:, None, :])
    a_tilde = ad.matmul(w_a, b_bar.values)
    b_tilde = ad.matmul(w_b, a_bar.values)
    return CoAttention(E, Seq(a_tilde, a_bar.mask), Seq(b_tilde, b_bar.mask), w_a, w_b)


def enrich(orig: Seq, attended: Seq) -> Seq:
    """[orig; attended; orig - attended; orig * attended] along the feature axis."""
    if orig.values.shape != attended.values.shape:
        raise ad.ShapeError(
            f"enrich: shapes {orig.values.shape} and {attended.values.shape} differ"
        )
    o, a = orig.values, attended.values
    return Seq(ad.concat([o, a, ad.sub(o, a), ad.mul(o, a)], axis=-1), orig.mask)


def pool_parts(outputs: Tensor, mask: np.ndarray, final: Tensor) -> tuple[Tensor, Tensor]:
    """(max over valid time steps, final states)."""
    return ad.max_over_rows(outputs, mask), final


def aggregate_and_pool(m_a: Seq, m_b: Seq, params: BiLSTMParams) -> Tensor:
    """Second BiLSTM over both enriched streams, then v = [max_a; max_b; last_a; last_b]."""
    if m_a.values.shape[1] == 0 or m_b.values.shape[1] == 0:
        raise ad.ShapeError("aggregate_and_pool: empty sequence")
    (va, last_a), (vb, last_b) = bilstm_many([(m_a.values, m_a.mask), (m_b.values, m_b.mask)], params)
    max_a, _ = pool_parts(va, m_a.mask, last_a)
    max_b, _ = pool_parts(vb, m_b.mask, last_b)
    return ad.concat([max_a, max_b, last_a, last_b], axis=-1)


@dataclass
class MLPParams:
    hidden: DenseParams
    out: DenseParams


def make_mlp(store: ParamStore, n_in: int, n_hidden: int) -> MLPParams:
    return MLPParams(make_dense(store, "mlp.hidden", n_in, n_hidden), make_dense(store, "mlp.out", n_hidden, 1))


def score(v: Tensor, mlp: MLPParams) -> Tensor:
    """P(y=1 | C, R) = sigmoid(W2 relu(W1 v + b1) + b2); shape (B,)."""
    if v.ndim == 1:
        v = ad.reshape(v, (1, -1))
    if v.shape[-1] != mlp.hidden.W.shape[0]:
        raise ad.ShapeError(f"score: input width {v.shape[-1]} != {mlp.hidden.W.shape[0]}")
    logit = dense(ad.relu(dense(v, mlp.hidden)), mlp.out)
    return ad.reshape(ad.sigmoid(logit), (v.shape[0],))


def bce_loss(p: Tensor, labels: Sequence[float] | np.ndarray) -> Tensor:
    """Mean binary cross-entropy with probabilities clamped to [1e-12, 1 - 1e-12]."""
    y = np.asarray(labels, dtype=np.float64).reshape(-1)
    if y.shape[0] != p.value.size:
        raise ad.ShapeError(f"bce_loss: {p.value.size} scores but {y.shape[0]} labels")
    if not np.all((y == 0) | (y == 1)):
        raise ValueError("bce_loss: labels must be 0 or 1")
    pc = ad.clip(ad.reshape(p, y.shape), BCE_EPS, 1.0 - BCE_EPS)
    ll = ad.add(
        ad.mul(Tensor(y), ad.log(pc)),
        ad.mul(Tensor(1.0 - y), ad.log(ad.sub(Tensor(np.ones_like(y)), pc))),
    )
    return ad.scale(ad.mean(ll), -1.0)


# ---------------------------------------------------------------- batching


@dataclass
class PairBatch:
    contexts: list[list[str]]
    responses: list[list[str]]
    owner: np.ndarray
    knowledge: list[list[str]] | None = None
    labels: np.ndarray | None = None
    candidate_ids: list[str] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.responses)


def _response_tokens(c: Candidate, cfg: ModelConfig) -> list[str]:
    toks = list(c.tokens[: cfg.max_response_len])
    return toks or [PAD]


def _knowledge_tokens(ex: Example, cfg: ModelConfig) -> list[str]:
    toks = list((ex.knowledge or ())[: cfg.knowledge_max_len])
    return toks or [PAD]


def make_batch(pairs: Sequence[tuple[Example, Candidate]], cfg: ModelConfig,
               labels: Sequence[float] | None = None) -> PairBatch:
    """Group (example, candidate) pairs so each distinct example is encoded once."""
    rows: dict[int, int] = {}
    contexts, knowledge, owner, responses, ids = [], [], [], [], []
    for ex, cand in pairs:
        key = id(ex)
        if key not in rows:
            rows[key] = len(contexts)
            ctx = truncate_context(ex.context_tokens, cfg.max_context_len)
            contexts.append(ctx or [PAD])
            knowledge.append(_knowledge_tokens(ex, cfg))
        owner.append(rows[key])
        responses.append(_response_tokens(cand, cfg))
        ids.append(cand.id)
    return PairBatch(
        contexts,
        responses,
        np.asarray(owner, dtype=np.intp),
        knowledge if cfg.variant == "kesim" else None,
        None if labels is None else np.asarray(labels, dtype=np.float64),
        ids,
    )


def example_batch(ex: Example, cfg: ModelConfig) -> PairBatch:
    labels = [1.0 if c.id in ex.correct_ids else 0.0 for c in ex.candidates]
    return make_batch([(ex, c) for c in ex.candidates], cfg, labels)


# ---------------------------------------------------------------- model


def _split_rows(x: Tensor, mask: np.ndarray, start: int, stop: int) -> Seq:
    m = mask[start:stop]
    T = max(1, int(m.sum(axis=1).max()))
    return Seq(ad.getitem(x, (slice(start, stop), slice(0, T))), m[:, :T])


class ESIM:
    """Baseline scorer.  ``forward`` maps a :class:`PairBatch` to probabilities."""

    variant = "esim"

    def __init__(self, cfg: ModelConfig, vocab: Vocabulary,
                 tables: tuple[EmbeddingTable | None, EmbeddingTable | None] = (None, None)):
        self.cfg = cfg
        self.vocab = vocab
        self.store = ParamStore(cfg.seed, cfg.init_scale)
        h = cfg.hidden
        self.embed = WordRepresentation(self.store, vocab, cfg.embedding(), *tables)
        self.encoder = make_bilstm(self.store, "encoder", cfg.input_dim, h)
        self.aggregator = make_bilstm(self.store, "aggregator", 8 * h, h)
        self.mlp = make_mlp(self.store, self.pooled_dim, cfg.mlp_hidden)

    @property
    def pooled_dim(self) -> int:
        return 8 * self.cfg.hidden

    def encode_streams(self, batch: PairBatch) -> tuple[Seq, Seq]:
        nc = len(batch.contexts)
        x, mask = self.embed(batch.contexts + batch.responses)
        enc = bilstm_encode(x, self.encoder, mask)
        ctx = _split_rows(enc.values, mask, 0, nc)
        resp = _split_rows(enc.values, mask, nc, nc + len(batch.responses))
        a_bar = Seq(ad.take(ctx.values, batch.owner, axis=0), ctx.mask[batch.owner])
        return a_bar, resp

    def pooled(self, batch: PairBatch) -> Tensor:
        a_bar, b_bar = self.encode_streams(batch)
        att = co_attend(a_bar, b_bar)
        return aggregate_and_pool(enrich(a_bar, att.attended_a), enrich(b_bar, att.attended_b), self.aggregator)

    def forward(self, batch: PairBatch) -> Tensor:
        return score(self.pooled(batch), self.mlp)

    def loss(self, batch: PairBatch) -> Tensor:
        return bce_loss(self.forward(batch), batch.labels)

    def score_example(self, ex: Example) -> np.ndarray:
        return self.forward(example_batch(ex, self.cfg)).value.copy()
