"""Subtask evaluation pipelines."""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

from ..corpus import NONE_CANDIDATE, NONE_ID, Candidate, Example
from ..esim import ESIM
from ..knowledge import CourseRecord, KnowledgeIndex, advising_snippet, extract_snippet
from ..tesim import EVAL_K, PoolIndex, SubDialogIndex, augment, find_similar, reduce_candidates
from .metrics import Metrics, compute_metrics, rank_ids


class ConfigurationError(ValueError):
    """An evaluation mode was requested without the assets it needs."""


@dataclass
class EvalOptions:
    tesim: bool = False
    subdialog_index: SubDialogIndex | None = None
    knowledge_index: KnowledgeIndex | None = None
    course_kb: dict[str, CourseRecord] | None = None
    seen_correct: set[str] | None = None  # enables CR when set
    protect_ground_truth: bool = True
    pool: PoolIndex | None = None  # subtask 2
    shortlist_size: int = 100
    snippet_words: int = 200

    def describe(self) -> dict:
        return {
            "tesim": self.tesim,
            "cr": self.seen_correct is not None,
            "knowledge": "manpages" if self.knowledge_index else ("courses" if self.course_kb else None),
            "shortlist": self.shortlist_size if self.pool is not None else None,
        }


def _check_assets(subtask: int, model: ESIM, dataset: Sequence[Example], opts: EvalOptions) -> None:
    if subtask not in (1, 2, 3, 4, 5):
        raise ConfigurationError(f"unknown subtask {subtask}")
    if opts.tesim and opts.subdialog_index is None:
        raise ConfigurationError("T-ESIM mode needs a sub-dialog index")
    if subtask == 2 and opts.pool is None:
        raise ConfigurationError("subtask 2 needs a global candidate pool")
    if model.cfg.variant == "kesim" and opts.knowledge_index is None and opts.course_kb is None:
        if any(ex.knowledge is None for ex in dataset):
            raise ConfigurationError("K-ESIM needs man pages, a course KB or precomputed snippets")


def prepare_example(subtask: int, ex: Example, model: ESIM, opts: EvalOptions) -> Example:
    """Apply the per-example pipeline; the returned example is what gets scored."""
    if model.cfg.variant == "kesim" and ex.knowledge is None:
        if opts.knowledge_index is not None:
            snippet = extract_snippet(ex, opts.knowledge_index, max_words=opts.snippet_words)
        else:
            snippet = advising_snippet(ex, opts.course_kb, opts.snippet_words)
        ex = replace(ex, knowledge=tuple(snippet))
    if subtask == 2:
        # global pool: CR first, then the IR shortlist
        ex = ex.with_candidates(_merge(opts.pool.pool, ex))
        if opts.seen_correct is not None:
            ex = reduce_candidates(ex, opts.seen_correct, opts.protect_ground_truth)
        allowed = {c.id for c in ex.candidates}
        ex = ex.with_candidates(opts.pool.shortlist(ex.context_tokens, opts.shortlist_size, allowed)
                                + [c for c in ex.candidates if c.id not in opts.pool.ids])
    elif opts.seen_correct is not None:
        ex = reduce_candidates(ex, opts.seen_correct, opts.protect_ground_truth)
    if subtask == 4 and not any(c.id == NONE_ID for c in ex.candidates):
        ex = ex.with_candidates(list(ex.candidates) + [NONE_CANDIDATE])
    if opts.tesim:
        similar = find_similar(ex.context_tokens, opts.subdialog_index, EVAL_K, exclude_parent=ex.dialog_id)
        ex = augment(ex, similar, "eval")[0].example
    return ex


def _merge(pool: Sequence[Candidate], ex: Example) -> list[Candidate]:
    ids = {c.id for c in pool}
    return list(pool) + [c for c in ex.candidates if c.id not in ids and c.id in ex.correct_ids]


def rank_example(model: ESIM, ex: Example) -> list[str]:
    scores = model.score_example(ex)
    return rank_ids(scores, [c.id for c in ex.candidates])


def evaluate_subtask(subtask: int, model: ESIM, dataset: Sequence[Example],
                     options: EvalOptions | None = None) -> Metrics:
    opts = options or EvalOptions()
    _check_assets(subtask, model, dataset, opts)
    rankings = []
    for ex in dataset:
        ready = prepare_example(subtask, ex, model, opts)
        rankings.append((rank_example(model, ready), ready.correct_ids))
    return compute_metrics(rankings)
