"""Word representation: two word-vector tables plus a character BiLSTM."""
from __future__ import annotations

import hashlib
from functools import lru_cache
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import ParamStore, Tensor
from .corpus import PAD, Vocabulary
from .layers import bilstm, make_bilstm

OOV_SCALE = 0.25


class VectorFileError(ValueError):
    pass


@lru_cache(maxsize=65536)
def oov_vector(token: str, dim: int, seed: int = 0) -> np.ndarray:
    """Random vector determined only by (token, dim, seed).  Read-only."""
    digest = hashlib.sha256(f"{seed}\x1f{dim}\x1f{token}".encode("utf-8")).digest()
    rng = np.random.default_rng(int.from_bytes(digest[:8], "little"))
    vec = rng.uniform(-OOV_SCALE, OOV_SCALE, size=dim)
    vec.setflags(write=False)
    return vec


@dataclass
class EmbeddingTable:
    dim: int
    vectors: dict[str, np.ndarray]
    seed: int = 0

    def __contains__(self, token: str) -> bool:
        return token in self.vectors

    def __len__(self) -> int:
        return len(self.vectors)

    def lookup(self, token: str) -> np.ndarray:
        if token == PAD:
            return np.zeros(self.dim)
        vec = self.vectors.get(token)
        return vec if vec is not None else oov_vector(token, self.dim, self.seed)

    @classmethod
    def empty(cls, dim: int, seed: int = 0) -> "EmbeddingTable":
        return cls(dim, {}, seed)


def load_vectors(path: str | Path, expected_dim: int, seed: int = 0) -> EmbeddingTable:
    """Parse a text vector file (``token v1 ... vd`` per line).

    A word2vec-style ``count dim`` header line is skipped.  Duplicate tokens
    keep their first vector.
    """
    vectors: dict[str, np.ndarray] = {}
    try:
        fh = open(path, encoding="utf-8")
    except OSError as err:
        raise VectorFileError(f"cannot read vector file {path}: {err}") from None
    with fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.rstrip("\n").split(" ")
            parts = [p for p in parts if p]
            if not parts:
                continue
            if lineno == 1 and len(parts) == 2 and all(p.isdigit() for p in parts):
                continue
            if len(parts) != expected_dim + 1:
                raise VectorFileError(
                    f"{path}:{lineno}: expected {expected_dim} values, got {len(parts) - 1}"
                )
            token = parts[0]
            if token in vectors:
                continue
            try:
                vectors[token] = np.array([float(v) for v in parts[1:]])
            except ValueError:
                raise VectorFileError(f"{path}:{lineno}: non-numeric value") from None
    return EmbeddingTable(expected_dim, vectors, seed)


@dataclass
class EmbeddingConfig:
    emb_dim_a: int = 300
    emb_dim_b: int = 100
    char_dim: int = 80
    char_emb_dim: int = 20
    max_word_chars: int = 20
    fine_tune: bool = False
    seed: int = 0

    @property
    def output_dim(self) -> int:
        return self.emb_dim_a + self.emb_dim_b + self.char_dim


class CharEncoder:
    """Character embeddings fed through a BiLSTM; output is both final states."""

    def __init__(self, store: ParamStore, vocab: Vocabulary, char_emb_dim: int = 20,
                 out_dim: int = 80, max_chars: int = 20, prefix: str = "char"):
        if out_dim % 2:
            raise ValueError("char output dim must be even")
        self.vocab = vocab
        self.out_dim = out_dim
        self.max_chars = max_chars
        self.table = store.add(f"{prefix}.emb", (len(vocab.chars), char_emb_dim))
        self.rnn = make_bilstm(store, f"{prefix}.rnn", char_emb_dim, out_dim // 2)

    def encode(self, tokens: Sequence[str]) -> Tensor:
        """Encode distinct non-empty tokens into a ``(len(tokens), out_dim)`` tensor."""
        if not tokens:
            return Tensor(np.zeros((0, self.out_dim)))
        for tok in tokens:
            if not tok:
                raise ValueError("char_compose: empty token")
        ids = [self.vocab.char_ids(tok[: self.max_chars]) for tok in tokens]
        L = max(len(x) for x in ids)
        idx = np.zeros((len(ids), L), dtype=np.intp)
        mask = np.zeros((len(ids), L), dtype=bool)
        for r, row in enumerate(ids):
            idx[r, : len(row)] = row
            mask[r, : len(row)] = True
        _, final = bilstm(ad.take(self.table, idx), mask, self.rnn)
        return final


def char_compose(token: str, enc: CharEncoder) -> np.ndarray:
    return enc.encode([token]).value[0]


class WordRepresentation:
    """Maps padded token batches to ``(B, T, emb_a + emb_b + char)`` inputs.

    A table backed by a vector file is frozen unless ``fine_tune`` is set; a
    table with no vectors (fallback mode) becomes a trainable lookup over the
    vocabulary initialised from the hash vectors.  Tokens outside the
    vocabulary always use their fixed hash vector; PAD maps to zeros.
    """

    def __init__(self, store: ParamStore, vocab: Vocabulary, cfg: EmbeddingConfig,
                 table_a: EmbeddingTable | None = None, table_b: EmbeddingTable | None = None):
        self.vocab = vocab
        self.cfg = cfg
        self.tables = [
            table_a if table_a is not None else EmbeddingTable.empty(cfg.emb_dim_a, cfg.seed),
            table_b if table_b is not None else EmbeddingTable.empty(cfg.emb_dim_b, cfg.seed + 1),
        ]
        self.weights: list[Tensor] = []
        for name, table in zip(("word_a", "word_b"), self.tables):
            matrix = np.stack([table.lookup(t) for t in vocab.tokens])
            if cfg.fine_tune or len(table) == 0:
                self.weights.append(store.add(f"{name}.emb", matrix.shape, init=matrix))
            else:
                self.weights.append(Tensor(matrix, name=f"{name}.frozen"))
        self.chars = CharEncoder(store, vocab, cfg.char_emb_dim, cfg.char_dim, cfg.max_word_chars)

    @property
    def output_dim(self) -> int:
        return self.cfg.output_dim

    def __call__(self, seqs: Sequence[Sequence[str]]) -> tuple[Tensor, np.ndarray]:
        B = len(seqs)
        T = max(1, max(len(s) for s in seqs))
        idx = np.zeros((B, T), dtype=np.intp)
        mask = np.zeros((B, T), dtype=bool)
        oov: list[tuple[int, int, str]] = []
        uniq: dict[str, int] = {}
        char_pos = np.zeros((B, T), dtype=np.intp)
        pad_pos = []
        for b, seq in enumerate(seqs):
            mask[b, : len(seq)] = True
            for t, tok in enumerate(seq):
                if tok == PAD:
                    pad_pos.append((b, t))
                    oov.append((b, t, tok))
                    continue
                i = self.vocab.index.get(tok)
                if i is None:
                    oov.append((b, t, tok))
                else:
                    idx[b, t] = i
                char_pos[b, t] = uniq.setdefault(tok, len(uniq))
        parts = []
        for weight, table in zip(self.weights, self.tables):
            part = ad.take(weight, idx)
            if oov:
                known = np.ones((B, T, 1), dtype=bool)
                fill = np.zeros((B, T, table.dim))
                for b, t, tok in oov:
                    known[b, t] = False
                    fill[b, t] = table.lookup(tok)
                part = ad.where(known, part, Tensor(fill))
            parts.append(part)
        chars = self.chars.encode(list(uniq))
        # padding and PAD tokens point at an appended zero row
        char_pos[~mask] = len(uniq)
        for b, t in pad_pos:
            char_pos[b, t] = len(uniq)
        chars = ad.concat([chars, Tensor(np.zeros((1, self.cfg.char_dim)))], axis=0)
        parts.append(ad.take(chars, char_pos))
        return ad.concat(parts, axis=-1), mask

    def word_repr(self, token: str) -> np.ndarray:
        out, _ = self([[token]])
        return out.value[0, 0]


def word_repr(token: str, rep: WordRepresentation) -> np.ndarray:
    return rep.word_repr(token)
