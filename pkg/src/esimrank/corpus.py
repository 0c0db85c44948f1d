"""Dialogs, ranking examples, dataset files and vocabularies.

Dataset files are JSON lines.  Each record looks like::

    {"data-split": "train", "example-id": "ex-17", "dialog-id": "d-17",
     "context": [{"speaker": "A", "text": "..."}, ...],
     "candidates": [{"id": "c0", "text": "..."}, ...],
     "correct-ids": ["c0"],
     "knowledge": "optional free text", "suggested-courses": ["EECS281"]}

``dialog-id`` defaults to ``example-id``; unknown keys are ignored.  The
DSTC7 spellings ``messages-so-far``/``utterance``, ``options-for-next``/
``candidate-id`` and ``options-for-correct-answers`` are accepted as aliases.
"""
from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

PAD, UNK, EOT = "<pad>", "<unk>", "__eot__"
PAD_ID, UNK_ID, EOT_ID = 0, 1, 2
NONE_ID = "NONE"
NONE_TEXT = "none"
SPEAKERS = ("A", "B", "retrieved")
SUBTASKS = (1, 2, 3, 4, 5)

_PUNCT = "\"'`.,;:!?()[]{}<>*~"


class DatasetError(ValueError):
    pass


def tokenize(text: str) -> list[str]:
    """Lowercase, split on whitespace, strip surrounding punctuation.

    Inner hyphens and dots survive, so ``apt-get`` and ``sources.list`` stay
    whole; leading dashes are kept too (``-la``).  Tokens with no letter or
    digit left (a lone ``-``) are dropped.
    """
    out = []
    for raw in text.lower().split():
        tok = raw.strip(_PUNCT)
        if any(ch.isalnum() for ch in tok):
            out.append(tok)
    return out


def normalize_text(text: str) -> str:
    return " ".join(tokenize(text))


@dataclass(frozen=True)
class Utterance:
    speaker: str
    text: str
    tokens: tuple[str, ...] = ()

    def __post_init__(self):
        if self.speaker not in SPEAKERS:
            raise ValueError(f"unknown speaker {self.speaker!r}")
        if not self.tokens:
            object.__setattr__(self, "tokens", tuple(tokenize(self.text)))

    @classmethod
    def from_tokens(cls, speaker: str, tokens: Sequence[str]) -> "Utterance":
        return cls(speaker, " ".join(tokens), tuple(tokens))


@dataclass(frozen=True)
class Dialog:
    id: str
    turns: tuple[Utterance, ...]

    def __post_init__(self):
        if not self.turns:
            raise ValueError(f"dialog {self.id!r} has no turns")


@dataclass(frozen=True)
class Candidate:
    id: str
    text: str
    tokens: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.tokens:
            object.__setattr__(self, "tokens", tuple(tokenize(self.text)))

    @property
    def is_none(self) -> bool:
        return self.id == NONE_ID


NONE_CANDIDATE = Candidate(NONE_ID, NONE_TEXT)


def flatten_context(dialog: Dialog | Sequence[Utterance]) -> list[str]:
    """Concatenate turns, each followed by the ``__eot__`` separator."""
    turns = dialog.turns if isinstance(dialog, Dialog) else dialog
    out: list[str] = []
    for turn in turns:
        out.extend(turn.tokens)
        out.append(EOT)
    return out


@dataclass(frozen=True)
class Example:
    """One ranking instance: a partial conversation and its candidates."""

    dialog_id: str
    turns: tuple[Utterance, ...]
    candidates: tuple[Candidate, ...]
    correct_ids: frozenset[str]
    subtask: int = 1
    example_id: str = ""
    knowledge: tuple[str, ...] | None = None
    split: str = ""
    extra: dict = field(default_factory=dict, compare=False, hash=False)

    def __post_init__(self):
        if not self.example_id:
            object.__setattr__(self, "example_id", self.dialog_id)
        ids = {c.id for c in self.candidates}
        stray = set(self.correct_ids) - ids - {NONE_ID}
        if stray:
            raise ValueError(f"{self.example_id}: correct ids {sorted(stray)} not among candidates")
        n = len(self.correct_ids)
        if self.subtask not in SUBTASKS:
            raise ValueError(f"{self.example_id}: unknown subtask {self.subtask}")
        if self.subtask in (1, 5) and n != 1:
            raise ValueError(f"{self.example_id}: subtask {self.subtask} needs exactly one correct id")
        if self.subtask == 3 and not 1 <= n <= 5:
            raise ValueError(f"{self.example_id}: subtask 3 needs 1-5 correct ids, got {n}")
        if NONE_ID in self.correct_ids and self.subtask != 4:
            raise ValueError(f"{self.example_id}: None sentinel only allowed in subtask 4")

    @property
    def context_tokens(self) -> list[str]:
        return flatten_context(self.turns)

    def dialog(self) -> Dialog:
        """The full conversation: context turns plus the first correct response."""
        turns = list(self.turns)
        for c in self.candidates:
            if c.id in self.correct_ids and not c.is_none:
                turns.append(Utterance.from_tokens("B" if turns and turns[-1].speaker == "A" else "A", c.tokens))
                break
        return Dialog(self.dialog_id, tuple(turns))

    def with_candidates(self, candidates: Iterable[Candidate]) -> "Example":
        cands = tuple(candidates)
        keep = {c.id for c in cands} | {NONE_ID}
        return replace(self, candidates=cands, correct_ids=frozenset(self.correct_ids & keep))


def truncate_context(tokens: Sequence[str], max_len: int) -> list[str]:
    """Keep the most recent ``max_len`` tokens."""
    tokens = list(tokens)
    return tokens[-max_len:] if len(tokens) > max_len else tokens


# ---------------------------------------------------------------- file I/O


def _first(rec: dict, *keys):
    for k in keys:
        if k in rec:
            return rec[k]
    return None


def _speaker_map(messages: list[dict]) -> dict:
    mapping: dict = {}
    for msg in messages:
        spk = msg.get("speaker")
        if spk in SPEAKERS:
            mapping[spk] = spk
        elif spk is not None and spk not in mapping:
            mapping[spk] = "AB"[len([v for v in mapping.values() if v != "retrieved"]) % 2]
    return mapping


def parse_record(rec: dict, subtask: int, index: int = 0) -> Example:
    ex_id = _first(rec, "example-id", "example_id", "id")
    where = f"record {index}" + (f" ({ex_id})" if ex_id is not None else "")
    messages = _first(rec, "context", "messages-so-far")
    if not messages:
        raise DatasetError(f"{where}: missing or empty context")
    cand_list = _first(rec, "candidates", "options-for-next")
    if cand_list is None:
        raise DatasetError(f"{where}: missing candidate list")
    correct = _first(rec, "correct-ids", "options-for-correct-answers")
    if correct is None:
        correct = []
    speakers = _speaker_map(messages)
    turns = []
    for i, msg in enumerate(messages):
        text = _first(msg, "text", "utterance")
        if text is None:
            raise DatasetError(f"{where}: context turn {i} has no text")
        spk = msg.get("speaker")
        turns.append(Utterance(speakers[spk] if spk is not None else "AB"[i % 2], text))
    candidates = []
    for i, c in enumerate(cand_list):
        cid = _first(c, "id", "candidate-id")
        text = _first(c, "text", "utterance")
        if cid is None or text is None:
            raise DatasetError(f"{where}: candidate {i} lacks id or text")
        candidates.append(Candidate(str(cid), text))
    correct_ids = [str(_first(c, "id", "candidate-id") if isinstance(c, dict) else c) for c in correct]
    if subtask == 4:
        if not correct_ids:
            correct_ids = [NONE_ID]
        if all(not c.is_none for c in candidates):
            candidates.append(NONE_CANDIDATE)
    knowledge = rec.get("knowledge")
    if isinstance(knowledge, str):
        knowledge = tuple(tokenize(knowledge))
    elif knowledge is not None:
        knowledge = tuple(knowledge)
    extra = {k: rec[k] for k in ("suggested-courses",) if k in rec}
    try:
        return Example(
            dialog_id=str(_first(rec, "dialog-id", "dialog_id") or ex_id or index),
            example_id=str(ex_id if ex_id is not None else index),
            turns=tuple(turns),
            candidates=tuple(candidates),
            correct_ids=frozenset(correct_ids),
            subtask=subtask,
            knowledge=knowledge,
            split=rec.get("data-split", ""),
            extra=extra,
        )
    except ValueError as err:
        raise DatasetError(f"{where}: {err}") from None


def load_dataset(path: str | Path, subtask: int = 1) -> list[Example]:
    """Read a JSON-lines dataset file into examples for ``subtask``."""
    if subtask not in SUBTASKS:
        raise ValueError(f"unknown subtask {subtask}")
    examples = []
    with open(path, encoding="utf-8") as fh:
        for index, line in enumerate(fh):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as err:
                raise DatasetError(f"record {index}: invalid JSON ({err})") from None
            examples.append(parse_record(rec, subtask, index))
    return examples


def example_to_record(ex: Example) -> dict:
    rec = {
        "data-split": ex.split,
        "example-id": ex.example_id,
        "dialog-id": ex.dialog_id,
        "context": [{"speaker": t.speaker, "text": t.text} for t in ex.turns],
        "candidates": [
            {"id": c.id, "text": c.text} for c in ex.candidates if not c.is_none
        ],
        "correct-ids": sorted(i for i in ex.correct_ids if i != NONE_ID),
    }
    if ex.knowledge is not None:
        rec["knowledge"] = " ".join(ex.knowledge)
    rec.update(ex.extra)
    return rec


def dump_dataset(examples: Iterable[Example], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for ex in examples:
            fh.write(json.dumps(example_to_record(ex), sort_keys=True) + "\n")


def load_candidate_pool(path: str | Path) -> list[Candidate]:
    """A global candidate pool: JSON lines of ``{"id", "text"}``."""
    pool = []
    with open(path, encoding="utf-8") as fh:
        for index, line in enumerate(fh):
            if line.strip():
                rec = json.loads(line)
                if "id" not in rec or "text" not in rec:
                    raise DatasetError(f"pool record {index}: needs id and text")
                pool.append(Candidate(str(rec["id"]), rec["text"]))
    return pool


# ---------------------------------------------------------------- vocabulary


@dataclass
class Vocabulary:
    tokens: list[str]
    chars: list[str]

    def __post_init__(self):
        self.index = {t: i for i, t in enumerate(self.tokens)}
        self.char_index = {c: i for i, c in enumerate(self.chars)}

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, token: str) -> bool:
        return token in self.index

    def id(self, token: str) -> int:
        return self.index.get(token, UNK_ID)

    def ids(self, tokens: Iterable[str]) -> list[int]:
        return [self.index.get(t, UNK_ID) for t in tokens]

    def char_ids(self, token: str) -> list[int]:
        return [self.char_index.get(ch, UNK_ID) for ch in token]

    def to_json(self) -> dict:
        return {"tokens": self.tokens, "chars": self.chars}

    @classmethod
    def from_json(cls, data: dict) -> "Vocabulary":
        return cls(list(data["tokens"]), list(data["chars"]))


def _example_tokens(ex: Example) -> Iterable[str]:
    for turn in ex.turns:
        yield from turn.tokens
    for c in ex.candidates:
        yield from c.tokens
    if ex.knowledge:
        yield from ex.knowledge


def build_vocabulary(examples: Iterable[Example], min_count: int = 1) -> Vocabulary:
    """Index tokens seen at least ``min_count`` times, most frequent first."""
    if min_count < 1:
        raise ValueError("min_count must be >= 1")
    counts: Counter[str] = Counter()
    chars: set[str] = set()
    for ex in examples:
        for tok in _example_tokens(ex):
            counts[tok] += 1
    reserved = [PAD, UNK, EOT]
    kept = sorted(
        (t for t, n in counts.items() if n >= min_count and t not in reserved),
        key=lambda t: (-counts[t], t),
    )
    for tok in kept:
        chars.update(ch for ch in tok if ch.isprintable())
    return Vocabulary(reserved + kept, ["<cpad>", "<cunk>"] + sorted(chars))
