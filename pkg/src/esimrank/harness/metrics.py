"""Recall@k and mean reciprocal rank over ranked candidate lists."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Collection, Iterable, Sequence

import numpy as np

KS = (1, 10, 50)


@dataclass(frozen=True)
class Metrics:
    recall_at_1: float
    recall_at_10: float
    recall_at_50: float
    mrr: float
    n: int

    def as_dict(self) -> dict:
        return {
            "recall@1": self.recall_at_1,
            "recall@10": self.recall_at_10,
            "recall@50": self.recall_at_50,
            "mrr": self.mrr,
            "examples": self.n,
        }


def rank_ids(scores: Sequence[float], ids: Sequence[str]) -> list[str]:
    """Candidate ids by descending score; equal scores keep input order."""
    order = np.argsort(-np.asarray(scores, dtype=np.float64), kind="stable")
    return [ids[i] for i in order]


def best_rank(ranked: Sequence[str], correct: Collection[str]) -> float:
    """1-based position of the first correct id, ``inf`` if none is ranked."""
    for pos, cid in enumerate(ranked, start=1):
        if cid in correct:
            return float(pos)
    return float("inf")


def compute_metrics(rankings: Iterable[tuple[Sequence[str], Collection[str]]]) -> Metrics:
    """Any-hit recall and best-rank MRR.

    Each item is ``(ranked candidate ids, correct ids)``.  With several
    correct ids an example counts as a hit at k if any of them is in the top
    k, and contributes 1/rank of the best-ranked one.
    """
    ranks = []
    for i, (ranked, correct) in enumerate(rankings):
        if not correct:
            raise ValueError(f"example {i} has no correct candidate")
        ranks.append(best_rank(ranked, set(correct)))
    if not ranks:
        raise ValueError("compute_metrics: no examples")
    n = len(ranks)
    # fsum is exactly rounded, so the result does not depend on example order
    recall = lambda k: math.fsum(1.0 for r in ranks if r <= k) / n
    return Metrics(
        recall_at_1=recall(1),
        recall_at_10=recall(10),
        recall_at_50=recall(50),
        mrr=math.fsum(1.0 / r for r in ranks) / n,
        n=n,
    )
