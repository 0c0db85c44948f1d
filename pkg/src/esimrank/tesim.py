"""T-ESIM data strategies.

Training dialogs are cut at every turn into (prefix, next turn) sub-dialogs
and indexed with TF-IDF.  A query context retrieves the most similar
sub-dialogs from *other* dialogs and each retrieved next turn is appended to
the query as an extra turn (k=3 copies for training, the top-1 for
evaluation).  Also here: negative sampling, candidate reduction against
responses already seen as correct, and IR shortlisting of a global pool.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .corpus import EOT, NONE_ID, Candidate, Dialog, Example, Utterance, flatten_context, normalize_text
from .tfidf import TfidfModel

TRAIN_K = 3
EVAL_K = 1


@dataclass(frozen=True)
class SubDialog:
    parent_id: str
    context: tuple[str, ...]
    response: tuple[str, ...]
    split_point: int

    def __post_init__(self):
        if self.split_point < 2:
            raise ValueError("split_point must be >= 2")


def split_subdialogs(dialog: Dialog) -> list[SubDialog]:
    """One sub-dialog per turn t >= 2 (1-based): turns before t, then turn t."""
    out = []
    for t in range(2, len(dialog.turns) + 1):
        out.append(SubDialog(
            dialog.id,
            tuple(flatten_context(dialog.turns[: t - 1])),
            dialog.turns[t - 1].tokens,
            t,
        ))
    return out


def _content(tokens: Iterable[str]) -> list[str]:
    return [t for t in tokens if t != EOT]


class SubDialogIndex:
    def __init__(self, subdialogs: Sequence[SubDialog]):
        self.subdialogs = list(subdialogs)
        self.tfidf = TfidfModel([_content(s.context) for s in self.subdialogs])

    def __len__(self) -> int:
        return len(self.subdialogs)

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for s in self.subdialogs:
                fh.write(json.dumps({
                    "parent-id": s.parent_id, "split-point": s.split_point,
                    "context": list(s.context), "response": list(s.response),
                }) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "SubDialogIndex":
        subs = []
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    r = json.loads(line)
                    subs.append(SubDialog(r["parent-id"], tuple(r["context"]), tuple(r["response"]), r["split-point"]))
        return cls(subs)


def build_subdialog_index(dialogs: Iterable[Dialog]) -> SubDialogIndex:
    subs: list[SubDialog] = []
    for d in dialogs:
        subs.extend(split_subdialogs(d))
    return SubDialogIndex(subs)


def find_similar(context_tokens: Sequence[str], index: SubDialogIndex, k: int,
                 exclude_parent: str | None = None, with_scores: bool = False):
    """Top-k sub-dialogs by cosine, skipping every child of ``exclude_parent``.

    Ties go to the lower parent id, then the earlier split point.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if len(index) == 0:
        return []
    sims = index.tfidf.similarities(_content(context_tokens))
    eligible = [i for i, s in enumerate(index.subdialogs) if s.parent_id != exclude_parent]
    eligible.sort(key=lambda i: (-sims[i], index.subdialogs[i].parent_id, index.subdialogs[i].split_point))
    top = eligible[:k]
    if with_scores:
        return [(index.subdialogs[i], float(sims[i])) for i in top]
    return [index.subdialogs[i] for i in top]


@dataclass(frozen=True)
class AugmentedExample:
    base: Example
    retrieved_response: tuple[str, ...] | None
    source_parent: str | None
    copy: int = 0

    def __post_init__(self):
        if self.source_parent is not None and self.source_parent == self.base.dialog_id:
            raise ValueError("retrieved response comes from the example's own dialog")

    @property
    def example(self) -> Example:
        if self.retrieved_response is None:
            return self.base
        turn = Utterance.from_tokens("retrieved", self.retrieved_response)
        ex_id = self.base.example_id if self.copy == 0 else f"{self.base.example_id}#r{self.copy}"
        return replace(self.base, turns=self.base.turns + (turn,), example_id=ex_id)


def augment(example: Example, similar: Sequence[SubDialog], mode: str = "train") -> list[AugmentedExample]:
    """Append retrieved responses as a new final turn.

    ``train`` gives one copy per retrieved sub-dialog; ``eval`` one copy with
    the top-1.  With nothing retrieved the example passes through unchanged.
    """
    if mode not in ("train", "eval"):
        raise ValueError(f"unknown mode {mode!r}")
    if not similar:
        return [AugmentedExample(example, None, None)]
    chosen = similar[:1] if mode == "eval" else similar
    return [AugmentedExample(example, s.response, s.parent_id, i) for i, s in enumerate(chosen)]


def augment_dataset(examples: Iterable[Example], index: SubDialogIndex, mode: str = "train",
                    k: int | None = None) -> list[Example]:
    k = k if k is not None else (TRAIN_K if mode == "train" else EVAL_K)
    out = []
    for ex in examples:
        similar = find_similar(ex.context_tokens, index, k, exclude_parent=ex.dialog_id)
        out.extend(a.example for a in augment(ex, similar, mode))
    return out


# ---------------------------------------------------------------- candidate sets


def _stable_int(text: str) -> int:
    return int.from_bytes(hashlib.sha256(text.encode("utf-8")).digest()[:8], "little")


def sample_negatives(example: Example, n: int = 9, seed: int = 0) -> Example:
    """All correct candidates plus ``n`` uniformly drawn incorrect ones, shuffled."""
    rng = np.random.default_rng([seed, _stable_int(example.example_id)])
    correct = [c for c in example.candidates if c.id in example.correct_ids]
    wrong = [c for c in example.candidates if c.id not in example.correct_ids]
    if len(wrong) > n:
        picks = rng.choice(len(wrong), size=n, replace=False)
        wrong = [wrong[i] for i in sorted(picks)]
    kept = correct + wrong
    order = rng.permutation(len(kept))
    return example.with_candidates(kept[i] for i in order)


def seen_correct_responses(examples: Iterable[Example]) -> set[str]:
    seen = set()
    for ex in examples:
        for c in ex.candidates:
            if c.id in ex.correct_ids and c.id != NONE_ID:
                seen.add(normalize_text(c.text))
    return seen


def reduce_candidates(example: Example, seen_correct: set[str], protect_ground_truth: bool = True) -> Example:
    """Drop candidates whose normalised text was a correct response earlier."""
    if not seen_correct:
        return example
    kept = []
    for c in example.candidates:
        protected = c.id == NONE_ID or (protect_ground_truth and c.id in example.correct_ids)
        if protected or normalize_text(c.text) not in seen_correct:
            kept.append(c)
    return example.with_candidates(kept)


def removed_ids(before: Example, after: Example) -> list[str]:
    kept = {c.id for c in after.candidates}
    return [c.id for c in before.candidates if c.id not in kept]


def write_cr_report(rows: Iterable[tuple[str, list[str]]], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for ex_id, ids in rows:
            fh.write(json.dumps({"example-id": ex_id, "removed": ids}) + "\n")


class PoolIndex:
    """TF-IDF over a global candidate pool, for shortlisting."""

    def __init__(self, pool: Sequence[Candidate]):
        self.pool = list(pool)
        self.ids = {c.id for c in self.pool}
        self.tfidf = TfidfModel([list(c.tokens) for c in self.pool])

    def shortlist(self, context_tokens: Sequence[str], size: int = 100,
                  allowed: set[str] | None = None) -> list[Candidate]:
        sims = self.tfidf.similarities(_content(context_tokens))
        idx = [i for i, c in enumerate(self.pool) if allowed is None or c.id in allowed]
        idx.sort(key=lambda i: (-sims[i], self.pool[i].id))
        return [self.pool[i] for i in idx[:size]]


def shortlist_global_pool(context_tokens: Sequence[str], pool: Sequence[Candidate] | PoolIndex,
                          size: int = 100) -> list[Candidate]:
    """The ``size`` pool entries closest to the context by TF-IDF cosine."""
    index = pool if isinstance(pool, PoolIndex) else PoolIndex(pool)
    return index.shortlist(context_tokens, size)


def sample_pool_candidates(example: Example, pool: Sequence[Candidate], n: int = 99, seed: int = 0) -> Example:
    """Training candidates for the global-pool regime: correct ones plus ``n`` random pool entries."""
    rng = np.random.default_rng([seed, _stable_int(example.example_id)])
    correct = [c for c in example.candidates if c.id in example.correct_ids]
    ids = {c.id for c in correct}
    others = [c for c in pool if c.id not in ids]
    picks = rng.choice(len(others), size=min(n, len(others)), replace=False) if others else []
    kept = correct + [others[i] for i in sorted(picks)]
    return example.with_candidates(kept[i] for i in rng.permutation(len(kept)))
