"""Small TF-IDF vector space with cosine ranking.

tf is the raw count, idf = ln(N / (1 + df)) + 1, vectors are L2-normalised,
so cosine similarity is a sparse dot product.  Query terms outside the
fitted vocabulary are ignored.
"""
from __future__ import annotations

import math
from collections import Counter
from typing import Iterable, Sequence

import numpy as np
from scipy import sparse


class TfidfModel:
    def __init__(self, documents: Sequence[Sequence[str]]):
        self.n_docs = len(documents)
        df: Counter[str] = Counter()
        for doc in documents:
            df.update(set(doc))
        self.vocab = {t: i for i, t in enumerate(sorted(df))}
        self.idf = np.array(
            [math.log(self.n_docs / (1 + df[t])) + 1.0 for t in sorted(df)]
        )
        self.matrix = self.transform(documents)

    def transform(self, documents: Iterable[Sequence[str]]) -> sparse.csr_matrix:
        rows, cols, vals = [], [], []
        n = 0
        for r, doc in enumerate(documents):
            n = r + 1
            counts = Counter(t for t in doc if t in self.vocab)
            if not counts:
                continue
            idx = np.array([self.vocab[t] for t in counts])
            w = np.array(list(counts.values()), dtype=np.float64) * self.idf[idx]
            w /= np.linalg.norm(w)
            rows.extend([r] * len(idx))
            cols.extend(idx.tolist())
            vals.extend(w.tolist())
        return sparse.csr_matrix((vals, (rows, cols)), shape=(n, len(self.vocab)))

    def vector(self, doc: Sequence[str]) -> sparse.csr_matrix:
        return self.transform([doc])

    def similarities(self, query: Sequence[str], matrix: sparse.csr_matrix | None = None) -> np.ndarray:
        """Cosine of ``query`` against every row of ``matrix`` (default: fitted docs)."""
        m = self.matrix if matrix is None else matrix
        if m.shape[0] == 0:
            return np.zeros(0)
        q = self.vector(query)
        return np.asarray((m @ q.T).todense()).reshape(-1)

    def cosine(self, a: Sequence[str], b: Sequence[str]) -> float:
        va, vb = self.vector(a), self.vector(b)
        return float((va @ vb.T).toarray()[0, 0])
