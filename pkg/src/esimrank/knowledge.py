"""External knowledge for K-ESIM.

Ubuntu-style: man pages become an entity table (command -> description), a
relation table (summary word -> commands) and a TF-IDF space over the
descriptions; a dialog's snippet is the best-matching description sentences
of the matched commands, capped at 200 words.

Advising-style: course records are rendered into one templated sentence each.
"""
from __future__ import annotations

import json
import re
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

from .corpus import EOT, Example, tokenize
from .stopwords import STOPWORDS
from .tfidf import TfidfModel

PARTIAL_MIN_LEN = 8
_HEADER = re.compile(r"^[A-Z][A-Z0-9 _-]*$")
_NAME_SPLIT = re.compile(r"\s+(?:\\-|-|–|—)\s+")
_SENTENCE_END = re.compile(r"(?<=[.!?])\s+")


@dataclass(frozen=True)
class ManPage:
    command: str
    name_summary: tuple[str, ...]
    description: tuple[str, ...]

    def __post_init__(self):
        if not self.command:
            raise ValueError("man page without a command name")


def split_sentences(text: str) -> list[str]:
    return [s.strip() for s in _SENTENCE_END.split(text.strip()) if s.strip()]


def _sections(text: str) -> dict[str, list[str]]:
    sections: dict[str, list[str]] = {}
    current = None
    for line in text.splitlines():
        if line and not line[0].isspace() and _HEADER.match(line.strip()):
            current = line.strip()
            sections.setdefault(current, [])
        elif current is not None and line.strip():
            sections[current].append(line.strip())
    return sections


def parse_man_page(text: str, fallback_name: str = "",
                   stopwords: frozenset[str] = STOPWORDS) -> ManPage | None:
    """Parse one plain-text page; ``None`` when it has no NAME section."""
    sec = _sections(text)
    if "NAME" not in sec:
        return None
    name_line = " ".join(sec["NAME"])
    parts = _NAME_SPLIT.split(name_line, maxsplit=1)
    if len(parts) == 2:
        names, summary = parts
        command = names.split(",")[0].strip().lower()
    else:
        command, summary = fallback_name.lower(), name_line
    command = command or fallback_name.lower()
    words = tuple(t for t in tokenize(summary) if t not in stopwords)
    description = tuple(split_sentences(" ".join(sec.get("DESCRIPTION", []))))
    return ManPage(command, words, description)


def parse_man_pages(directory: str | Path, stopwords: frozenset[str] = STOPWORDS) -> list[ManPage]:
    pages = []
    for path in sorted(Path(directory).iterdir()):
        if not path.is_file():
            continue
        page = parse_man_page(path.read_text(encoding="utf-8", errors="replace"), path.stem, stopwords)
        if page is None:
            warnings.warn(f"{path.name}: no NAME section, skipped", stacklevel=2)
            continue
        pages.append(page)
    return pages


@dataclass
class KnowledgeIndex:
    entity: dict[str, str]
    relation: dict[str, list[str]]
    sentences: dict[str, list[str]]
    tfidf: TfidfModel
    row: dict[str, int] = field(default_factory=dict)


def build_index(pages: Sequence[ManPage], stopwords: frozenset[str] = STOPWORDS) -> KnowledgeIndex:
    if not pages:
        raise ValueError("build_index: no man pages")
    entity: dict[str, str] = {}
    sentences: dict[str, list[str]] = {}
    relation: dict[str, list[str]] = {}
    for page in pages:
        if page.command in entity:
            continue
        entity[page.command] = " ".join(page.description)
        sentences[page.command] = list(page.description)
        for word in page.name_summary:
            if word in stopwords:
                continue
            cmds = relation.setdefault(word, [])
            if page.command not in cmds:
                cmds.append(page.command)
    commands = list(entity)
    tfidf = TfidfModel([tokenize(entity[c]) for c in commands])
    return KnowledgeIndex(entity, relation, sentences, tfidf, {c: i for i, c in enumerate(commands)})


def match_commands(context_tokens: Sequence[str], index: KnowledgeIndex) -> list[str]:
    """Commands relevant to a context, in order of first mention.

    Direct entity hits plus substring matches for tokens longer than eight
    characters; the relation table is consulted only if both find nothing.
    """
    found: list[str] = []
    seen: set[str] = set()

    def keep(cmd: str) -> None:
        if cmd not in seen:
            seen.add(cmd)
            found.append(cmd)

    for tok in context_tokens:
        if tok == EOT:
            continue
        if tok in index.entity:
            keep(tok)
        if len(tok) > PARTIAL_MIN_LEN:
            for cmd in index.entity:
                if cmd != tok and (cmd in tok or tok in cmd):
                    keep(cmd)
    if found:
        return found
    for tok in context_tokens:
        for cmd in index.relation.get(tok, ()):
            keep(cmd)
    return found


def select_snippet(commands: Sequence[str], context_tokens: Sequence[str], index: KnowledgeIndex,
                   k: int = 5, max_words: int = 200) -> list[str]:
    """Top-k commands by description/context cosine, their sentences re-ranked
    by cosine, emitted word by word up to ``max_words``."""
    if not commands:
        return []
    ctx = [t for t in context_tokens if t != EOT]
    sims = index.tfidf.similarities(ctx)
    ranked = sorted(commands, key=lambda c: -sims[index.row[c]])[:k]
    sents = [tokenize(s) for c in ranked for s in index.sentences[c]]
    if not sents:
        return []
    sent_sims = index.tfidf.similarities(ctx, index.tfidf.transform(sents))
    order = sorted(range(len(sents)), key=lambda i: -sent_sims[i])
    out: list[str] = []
    for i in order:
        room = max_words - len(out)
        if room <= 0:
            break
        out.extend(sents[i][:room])
    return out


def extract_snippet(ex: Example, index: KnowledgeIndex, k: int = 5, max_words: int = 200) -> list[str]:
    ctx = ex.context_tokens
    return select_snippet(match_commands(ctx, index), ctx, index, k, max_words)


# ---------------------------------------------------------------- advising KB


@dataclass(frozen=True)
class CourseRecord:
    course_id: str
    name: str | None = None
    workload: str | None = None
    class_size: str | None = None
    credits: int | str | None = None
    discussion: bool | None = None
    days: tuple[str, ...] = ()
    time_of_day: str | None = None
    attributes: dict = field(default_factory=dict, compare=False, hash=False)

    def __post_init__(self):
        if not self.course_id:
            raise ValueError("course record without an id")


def course_to_sentence(rec: CourseRecord) -> str:
    head = rec.course_id if rec.name is None else f"{rec.course_id} is {rec.name}"
    clauses = []
    if rec.workload is not None:
        clauses.append(f"has {rec.workload} workload")
    if rec.class_size is not None:
        clauses.append(f"{rec.class_size} class size")
    if rec.credits is not None:
        clauses.append(f"{rec.credits} credits")
    if rec.discussion is not None:
        clauses.append("has a discussion" if rec.discussion else "has no discussion")
    if rec.days:
        when = ", ".join(rec.days)
        if rec.time_of_day:
            when += f" {rec.time_of_day}"
        clauses.append(f"the classes are on {when}")
    return ", ".join([head] + clauses)


_COURSE_KEYS = {
    "id": "course_id", "course_id": "course_id", "name": "name", "workload": "workload",
    "class_size": "class_size", "credits": "credits", "discussion": "discussion",
    "days": "days", "time": "time_of_day", "time_of_day": "time_of_day",
}


def course_from_dict(rec: dict) -> CourseRecord:
    kwargs, attrs = {}, {}
    for k, v in rec.items():
        if k in _COURSE_KEYS:
            kwargs[_COURSE_KEYS[k]] = tuple(v) if k == "days" else v
        else:
            attrs[k] = v
    return CourseRecord(attributes=attrs, **kwargs)


def load_course_kb(path: str | Path) -> dict[str, CourseRecord]:
    kb = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                rec = course_from_dict(json.loads(line))
                kb[rec.course_id] = rec
    return kb


def advising_snippet(ex: Example, kb: dict[str, CourseRecord], max_words: int = 200) -> list[str]:
    """Sentences for the suggested courses, concatenated up to ``max_words``.

    Suggested courses come from the record's ``suggested-courses`` field, or
    else from course ids mentioned in the context.
    """
    ids = ex.extra.get("suggested-courses")
    if ids is None:
        by_lower = {c.lower(): c for c in kb}
        ids = []
        for tok in ex.context_tokens:
            cid = by_lower.get(tok)
            if cid is not None and cid not in ids:
                ids.append(cid)
    out: list[str] = []
    for cid in ids:
        if cid in kb:
            out.extend(tokenize(course_to_sentence(kb[cid])))
    return out[:max_words]


# ---------------------------------------------------------------- snippet cache


def write_snippets(snippets: dict[str, list[str]], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for ex_id, toks in snippets.items():
            fh.write(json.dumps({"example-id": ex_id, "knowledge": list(toks)}) + "\n")


def read_snippets(path: str | Path) -> dict[str, list[str]]:
    out = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                rec = json.loads(line)
                out[rec["example-id"]] = list(rec["knowledge"])
    return out


def attach_knowledge(examples: Iterable[Example], snippets: dict[str, list[str]]) -> list[Example]:
    return [replace(ex, knowledge=tuple(snippets.get(ex.example_id, ()))) for ex in examples]
