"""Small hand-built examples shared by several test modules."""
from esimrank.corpus import Candidate, Dialog, Example, Utterance


def make_example(dialog_id, turns, cands, correct, subtask=1, **kw):
    return Example(
        dialog_id,
        tuple(Utterance("AB"[i % 2], t) for i, t in enumerate(turns)),
        tuple(Candidate(cid, text) for cid, text in cands),
        frozenset(correct),
        subtask,
        **kw,
    )


def make_dialog(dialog_id, turns):
    return Dialog(dialog_id, tuple(Utterance("AB"[i % 2], t) for i, t in enumerate(turns)))


# pass/fail lines of the acceptance suite, printed again in the terminal summary
ACCEPTANCE_LINES: list[str] = []
