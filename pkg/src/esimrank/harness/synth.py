"""Seeded template corpus: problem/solution dialogs plus fixture man pages.

Each template owns a command, problem words, detail words and solution
words.  A dialog has four turns (problem, clarifying question, detail,
solution); the solution turn is the correct candidate and the other nine
candidates are solution turns of dialogs from other templates.  Dialogs of
one template share vocabulary, so retrieving a similar training dialog
surfaces a near-copy of the right answer.  ``mention_rate`` is the chance
that the problem turn names the command outright.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..stopwords import STOPWORDS

FIXTURE_COMMANDS = (
    "grep", "apt-get", "chmod", "mount", "ssh", "tar", "sed", "awk", "crontab", "iptables",
    "ifconfig", "xrandr", "dpkg", "systemctl", "useradd", "rsync", "fdisk", "lsblk", "modprobe",
    "ufw", "chown", "passwd", "umount", "wget", "curl", "lspci", "dmesg", "journalctl", "nano",
    "sudo", "gparted", "ping", "route", "hostname", "alsamixer", "pulseaudio", "nautilus",
    "gnome-shell", "update-grub", "blkid",
)
GREETINGS = ("hi", "hello", "hey", "help")
PROBLEM_FILLER = (("my", "is", "broken"), ("the", "keeps", "failing"), ("cannot", "get", "working"))
CLARIFY = (
    ("which", "release", "are", "you", "on"),
    ("did", "you", "reboot", "after", "that"),
    ("what", "does", "the", "log", "say"),
    ("can", "you", "paste", "the", "error"),
)
DETAIL_FILLER = (("it", "says"), ("i", "see"), ("log", "shows"))
CLOSING = (("then", "reboot"), ("and", "check", "again"), ("that", "should", "fix", "it"))
SPLITS = ("train", "validation", "test")

_CONS = "bdfgklmnprstvz"
_VOWELS = "aeiou"


@dataclass(frozen=True)
class Template:
    command: str
    problem: tuple[str, ...]
    detail: tuple[str, ...]
    solution: tuple[str, ...]


def _reserved() -> set[str]:
    words = set(STOPWORDS) | set(GREETINGS) | set(FIXTURE_COMMANDS)
    for group in (PROBLEM_FILLER, CLARIFY, DETAIL_FILLER, CLOSING):
        for phrase in group:
            words.update(phrase)
    return words


def make_lexicon(rng: np.random.Generator, size: int) -> list[str]:
    """``size`` distinct pronounceable pseudo-words of 4 to 6 letters."""
    reserved = _reserved()
    seen: set[str] = set()
    out: list[str] = []
    while len(out) < size:
        n = int(rng.integers(2, 4))
        w = "".join(_CONS[rng.integers(len(_CONS))] + _VOWELS[rng.integers(len(_VOWELS))] for _ in range(n))
        if w not in seen and w not in reserved:
            seen.add(w)
            out.append(w)
    return out


def make_templates(rng: np.random.Generator, lexicon: list[str], n_templates: int) -> list[Template]:
    per = 10
    disjoint = len(lexicon) >= per * n_templates
    order = rng.permutation(len(lexicon))
    templates = []
    for t in range(n_templates):
        if disjoint:
            words = [lexicon[i] for i in order[t * per:(t + 1) * per]]
        else:
            words = [lexicon[i] for i in rng.choice(len(lexicon), size=min(per, len(lexicon)), replace=False)]
            words = (words * per)[:per]
        cmd = FIXTURE_COMMANDS[t] if t < len(FIXTURE_COMMANDS) else f"tool{t}"
        templates.append(Template(cmd, tuple(words[:4]), tuple(words[4:7]), tuple(words[7:10])))
    return templates


def _pick(rng, options):
    return options[int(rng.integers(len(options)))]


def _sample(rng, words, k):
    return [words[i] for i in rng.choice(len(words), size=min(k, len(words)), replace=False)]


def make_dialog(rng: np.random.Generator, tpl: Template, mention: bool,
                varied_filler: bool = False, solution_echo: bool = True) -> list[list[str]]:
    """Four turns: problem, clarifying question, detail, solution.

    Filler phrases are fixed unless ``varied_filler``; with only a few
    training dialogs, varied filler becomes a memorisation cue that drowns
    out the template words.  ``solution_echo`` makes the solution name two
    problem words, a direct lexical link back to the context.
    """
    def phrase(options):
        return _pick(rng, options) if varied_filler else options[0]

    filler = phrase(PROBLEM_FILLER)
    t1 = [phrase(GREETINGS), filler[0], *_sample(rng, tpl.problem, 3), *filler[1:]]
    if mention:
        t1 += ["with", tpl.command]
    t2 = list(phrase(CLARIFY))
    t3 = [*phrase(DETAIL_FILLER), *_sample(rng, tpl.detail, 2), _pick(rng, tpl.problem)]
    if mention:
        t3 += ["after", tpl.command]
    # a template's fix is always phrased the same way
    echo = ["for", *tpl.problem[:2]] if solution_echo else []
    t4 = ["try", tpl.command, *tpl.solution, *echo, *phrase(CLOSING)]
    return [t1, t2, t3, t4]


def man_page_text(tpl: Template) -> str:
    p, d, s = tpl.problem, tpl.detail, tpl.solution
    body = (
        f"{tpl.command} repairs {p[0]} and {p[1]} problems. "
        f"Run {tpl.command} with {s[0]} to restore the {d[0]}. "
        f"The {s[1]} option resets the {p[2]} state. "
        f"Use {s[2]} when the {d[1]} {d[2]} fails."
    )
    return (
        "NAME\n"
        f"       {tpl.command} - {' '.join(p)} tool\n\n"
        "SYNOPSIS\n"
        f"       {tpl.command} [OPTION]...\n\n"
        "DESCRIPTION\n"
        f"       {body}\n"
    )


def _assign_splits(rng, template_of: list[int], fractions) -> list[str]:
    """First dialog of every template goes to train when room allows."""
    n = len(template_of)
    n_train = int(round(fractions[0] * n))
    n_val = int(round(fractions[1] * n))
    order = list(rng.permutation(n))
    first_seen: set[int] = set()
    firsts, rest = [], []
    for i in order:
        (rest if template_of[i] in first_seen else firsts).append(i)
        first_seen.add(template_of[i])
    ranked = firsts + rest
    split = [""] * n
    for pos, i in enumerate(ranked):
        split[i] = "train" if pos < n_train else ("validation" if pos < n_train + n_val else "test")
    return split


def generate_synthetic(out_dir: str | Path, seed: int = 0, n_dialogs: int = 60, n_templates: int = 10,
                       vocab_size: int = 200, n_candidates: int = 10, mention_rate: float = 1.0, varied_filler: bool = False,
                       solution_echo: bool = True,
                       fractions: tuple[float, float, float] = (0.6, 0.2, 0.2)) -> dict[str, Path]:
    """Write ``train/validation/test.jsonl``, ``pool.jsonl`` and ``manpages/``.

    Distractors are drawn from the example's own split, so a small split
    can hold fewer than ``n_candidates`` candidates per example.  Returns the
    written paths by name.  Output is byte-identical for equal
    arguments.
    """
    for name, v in (("n_dialogs", n_dialogs), ("n_templates", n_templates),
                    ("vocab_size", vocab_size), ("n_candidates", n_candidates)):
        if v <= 0:
            raise ValueError(f"{name} must be positive")
    if not 0.0 <= mention_rate <= 1.0:
        raise ValueError("mention_rate must lie in [0, 1]")
    if n_templates < 2:
        raise ValueError("need at least two templates for distractors")
    rng = np.random.default_rng(seed)
    lexicon = make_lexicon(rng, vocab_size)
    templates = make_templates(rng, lexicon, n_templates)
    template_of = [i % n_templates for i in range(n_dialogs)]
    dialogs = [make_dialog(rng, templates[t], bool(rng.random() < mention_rate),
                           varied_filler, solution_echo) for t in template_of]
    split = _assign_splits(rng, template_of, fractions)
    width = max(5, len(str(n_dialogs)))
    rid = lambda i: f"r{i:0{width}d}"

    records = {s: [] for s in SPLITS}
    for i, turns in enumerate(dialogs):
        # distractors come from the same split so held-out answers are never training negatives
        others = [j for j in range(n_dialogs) if split[j] == split[i] and template_of[j] != template_of[i]]
        picks = rng.choice(len(others), size=min(n_candidates - 1, len(others)), replace=False)
        cand_ids = [i] + [others[p] for p in picks]
        cand_ids = [cand_ids[k] for k in rng.permutation(len(cand_ids))]
        speakers = ("A", "B", "A")
        records[split[i]].append({
            "data-split": split[i],
            "dialog-id": f"d{i:0{width}d}",
            "example-id": f"e{i:0{width}d}",
            "context": [{"speaker": sp, "text": " ".join(t)} for sp, t in zip(speakers, turns[:3])],
            "candidates": [{"id": rid(j), "text": " ".join(dialogs[j][3])} for j in cand_ids],
            "correct-ids": [rid(i)],
            "template": templates[template_of[i]].command,
        })

    out = Path(out_dir)
    (out / "manpages").mkdir(parents=True, exist_ok=True)
    paths: dict[str, Path] = {}
    for s in SPLITS:
        paths[s] = out / f"{s}.jsonl"
        with open(paths[s], "w", encoding="utf-8", newline="\n") as fh:
            for rec in records[s]:
                fh.write(json.dumps(rec, sort_keys=True) + "\n")
    paths["pool"] = out / "pool.jsonl"
    with open(paths["pool"], "w", encoding="utf-8", newline="\n") as fh:
        for i, turns in enumerate(dialogs):
            fh.write(json.dumps({"id": rid(i), "text": " ".join(turns[3])}, sort_keys=True) + "\n")
    paths["manpages"] = out / "manpages"
    for tpl in templates:
        (out / "manpages" / f"{tpl.command}.1").write_text(man_page_text(tpl), encoding="utf-8", newline="\n")
    return paths
