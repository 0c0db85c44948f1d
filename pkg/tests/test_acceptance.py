"""Acceptance criteria, each at its stated tolerance.

Every test records one ``PASS``/``FAIL`` line; the lines are printed as they
happen and again in the pytest terminal summary.  Run alone with
``pytest tests/test_acceptance.py -v`` or ``python tests/test_acceptance.py``.
"""
import functools
import json
import math
import sys
import time

import numpy as np
import pytest

from esimrank.autodiff import Tensor
from esimrank.corpus import EOT, NONE_CANDIDATE, build_vocabulary, tokenize
from esimrank.esim import ESIM, ModelConfig, Seq, co_attend, example_batch
from esimrank.harness import cli
from esimrank.harness.config import TrainConfig
from esimrank.harness.experiments import overfit_smoke, tesim_benefit
from esimrank.harness.gradcheck import tiny_gradcheck
from esimrank.harness.metrics import compute_metrics, rank_ids
from esimrank.harness.train import lr_schedule
from esimrank.kesim import KESIM, TripleEncoded, triple_co_attend
from esimrank.knowledge import build_index, match_commands, parse_man_pages, select_snippet
from esimrank.tesim import (
    TRAIN_K,
    augment,
    augment_dataset,
    build_subdialog_index,
    find_similar,
    reduce_candidates,
    sample_negatives,
    seen_correct_responses,
)
from helpers import ACCEPTANCE_LINES, make_dialog, make_example
from oracles import ranking_oracle


def _record(name, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'}  {name}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line, flush=True)


def criterion(name):
    def wrap(fn):
        @functools.wraps(fn)
        def run(*args, **kwargs):
            try:
                detail = fn(*args, **kwargs)
            except BaseException as exc:
                msg = str(exc).strip().splitlines()
                _record(name, False, f"{type(exc).__name__}: {msg[0] if msg else ''}")
                raise
            _record(name, True, detail)
        return run
    return wrap


@criterion("gradient correctness")
def test_gradient_correctness():
    t0 = time.perf_counter()
    errs = {}
    for variant in ("esim", "kesim"):
        errs[variant], n = tiny_gradcheck(variant)
    seconds = time.perf_counter() - t0
    detail = f"max rel err esim {errs['esim']:.2e}, kesim {errs['kesim']:.2e}, {seconds:.0f}s"
    assert max(errs.values()) < 1e-6, detail
    assert seconds < 120, detail
    return detail


def _random_seq(rng, batch, length, width, scale):
    lengths = rng.integers(1, length + 1, size=batch)
    return Seq(Tensor(scale * rng.normal(size=(batch, length, width))), np.arange(length)[None] < lengths[:, None])


@criterion("attention stochasticity")
def test_attention_rows_sum_to_one():
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(1000):
        batch, width = int(rng.integers(1, 4)), int(rng.integers(1, 7))
        scale = float(10 ** rng.uniform(-2, 1.5))
        lens = rng.integers(1, 9, size=3)
        a, b, k = (_random_seq(rng, batch, int(n), width, scale) for n in lens)
        att = co_attend(a, b)
        weights = [att.weights_a, att.weights_b]
        assert len(weights) == 2
        tri = triple_co_attend(TripleEncoded(a, b, k)).weight_sets()
        assert len(tri) == 6
        for w in weights + list(tri):
            worst = max(worst, float(np.abs(w.value.sum(axis=-1) - 1.0).max()))
    detail = f"1000 draws, 2 + 6 matrices each, worst |row sum - 1| = {worst:.1e}"
    assert worst <= 1e-9, detail
    return detail


@criterion("dimension chain")
def test_dimension_chain():
    ex = make_example("d", ["my wifi drops", "which card"], [("a", "reload iwlwifi"), ("b", "reboot")], {"a"},
                      knowledge=("iwlwifi", "driver", "module"))
    cfg = ModelConfig()
    esim = ESIM(cfg, build_vocabulary([ex]))
    assert cfg.input_dim == 480
    assert esim.encoder.fwd.W.shape == (480, 4 * 200)
    assert esim.aggregator.fwd.W.shape == (1600, 4 * 200)
    batch = example_batch(ex, cfg)
    c_bar, r_bar = esim.encode_streams(batch)
    assert c_bar.width == r_bar.width == 400
    v = esim.pooled(batch)
    assert v.shape == (2, 1600) and esim.mlp.hidden.W.shape[0] == 1600
    kcfg = ModelConfig(variant="kesim")
    kesim = KESIM(kcfg, build_vocabulary([ex]))
    assert kesim.pooled(example_batch(ex, kcfg)).shape == (2, 2400)
    return "480 -> 400 -> 1600 -> 400, pooled 1600 (ESIM), merged 2400 (K-ESIM)"


@criterion("overfit smoke test")
def test_overfit_smoke(tmp_path):
    r = overfit_smoke(tmp_path, seed=0, max_steps=2000)
    detail = (f"train R@1 = 1.0 at step {r.train_fit_step}, held-out R@1 >= 0.8 at step {r.heldout_step} "
              f"(best {r.best_heldout:.3f}), {r.seconds:.0f}s")
    assert r.train_fit_step is not None and r.train_fit_step <= 500, detail
    assert r.heldout_step is not None and r.heldout_step <= 2000, detail
    assert r.seconds < 600, detail
    return detail


@criterion("metric oracle equivalence")
def test_metric_oracle_equivalence():
    rng = np.random.default_rng(7)
    rankings, rows, multi = [], [], 0
    for _ in range(200):
        n = int(rng.integers(1, 121))
        scores = (rng.integers(0, 7, size=n) / 6).tolist()
        ids = [f"c{i}" for i in range(n)]
        k = int(rng.integers(1, min(5, n) + 1))
        correct = {ids[i] for i in rng.choice(n, size=k, replace=False)}
        multi += k > 1
        rankings.append((rank_ids(scores, ids), correct))
        rows.append(ranking_oracle(scores, ids, correct))
    m = compute_metrics(rankings)
    expect = tuple(math.fsum(col) / len(rows) for col in zip(*rows))
    got = (m.recall_at_1, m.recall_at_10, m.recall_at_50, m.mrr)
    assert got == expect, f"{got} != {expect}"
    assert multi > 0
    return f"200 score sets ({multi} multi-correct), exact match"


@criterion("IR pipeline fixtures")
def test_ir_pipeline_fixtures(fixtures_dir, tmp_path):
    idx = build_index(parse_man_pages(fixtures_dir / "manpages"))
    ctx = lambda text: tokenize(text) + [EOT]
    assert match_commands(ctx("how do i use grep to search my logs"), idx) == ["grep"]
    assert match_commands(ctx("xserver-xorg is broken after the upgrade"), idx) == ["xserver-xorg-core"]
    assert match_commands(ctx("xserver fails"), idx) == []
    assert match_commands(ctx("which tool finds a pattern in text"), idx) == ["grep"]
    c = ctx("how do i use grep to search my logs")
    assert select_snippet(match_commands(c, idx), c, idx) == tokenize(
        "By default grep prints the matching lines. "
        "grep searches the named input files for lines containing a match to the given pattern. "
        "The -i option ignores case distinctions in both the pattern and the input files."
    )
    c = ctx("which tool finds a pattern in text")
    snippet = select_snippet(match_commands(c, idx), c, idx)
    assert snippet[:4] == ["the", "-i", "option", "ignores"]
    assert snippet[-7:] == ["by", "default", "grep", "prints", "the", "matching", "lines"]
    body = " ".join(f"Sentence {i} mentions longtool and word{i} plus filler text here." for i in range(60))
    (tmp_path / "longtool.1").write_text(f"NAME\n  longtool - long tool\n\nDESCRIPTION\n  {body}\n")
    long_idx = build_index(parse_man_pages(tmp_path))
    c = ctx("longtool word3")
    n = len(select_snippet(match_commands(c, long_idx), c, long_idx))
    assert n <= 200
    return f"direct, partial (>8 chars) and relation cases match; long snippet capped at {n} tokens"


TRAIN_DIALOGS = [
    make_dialog("d1", ["wifi drops often", "which card", "intel card", "reload iwlwifi module"]),
    make_dialog("d2", ["wifi keeps dropping", "what card", "intel wireless", "reload the iwlwifi driver"]),
    make_dialog("d3", ["sound is muted", "which output", "hdmi output", "open alsamixer and unmute"]),
    make_dialog("d4", ["no sound at all", "what output", "speakers", "unmute in alsamixer"]),
]


@criterion("T-ESIM mechanics")
def test_tesim_mechanics():
    index = build_subdialog_index(TRAIN_DIALOGS)
    train = [make_example(d.id, [t.text for t in d.turns[:3]], [("g", d.turns[3].text), ("x", "reboot")], {"g"})
             for d in TRAIN_DIALOGS]
    augmented = augment_dataset(train, index, "train")
    assert TRAIN_K == 3 and len(augmented) == 3 * len(train)
    for ex in train:
        similar = find_similar(ex.context_tokens, index, len(index), exclude_parent=ex.dialog_id)
        assert similar and all(s.parent_id != ex.dialog_id for s in similar)
        (only,) = augment(ex, similar, "eval")
        assert only.example.turns[:-1] == ex.turns
        assert only.example.turns[-1].tokens == similar[0].response
    cands = [(f"c{i}", f"answer number {i}") for i in range(30)]
    big = make_example("q", ["help"], cands, {"c4"})
    a, b = sample_negatives(big, 9, seed=3), sample_negatives(big, 9, seed=3)
    assert a == b and len(a.candidates) == 10
    assert sum(c.id in a.correct_ids for c in a.candidates) == 1
    seen = seen_correct_responses(train)
    probe = make_example("p", ["wifi"], [("t", "reload iwlwifi module"), ("s", "Reload the iwlwifi driver"),
                                         ("k", "keep me")], {"t"})
    probe = probe.with_candidates(list(probe.candidates) + [NONE_CANDIDATE])
    reduced = reduce_candidates(probe, seen)
    assert [c.id for c in reduced.candidates] == ["t", "k", NONE_CANDIDATE.id]
    return "k=3 expansion, top-1 eval turn, no same-parent hits, 1+9 stable negatives, exact CR"


@criterion("directional T-ESIM benefit")
@pytest.mark.slow
def test_tesim_benefit(tmp_path):
    t0 = time.perf_counter()
    r = tesim_benefit(tmp_path, seeds=(0, 1, 2), n_dialogs=150)
    seconds = time.perf_counter() - t0
    per_seed = ", ".join(f"{x.baseline:.3f}->{x.tesim:.3f}" for x in r.runs)
    detail = (f"mean test R@1 ESIM {r.mean_baseline:.3f}, T-ESIM {r.mean_tesim:.3f}, "
              f"gain {100 * r.gain:+.1f} points [{per_seed}], {seconds:.0f}s")
    assert r.gain >= 0.05, detail
    assert seconds < 1800, detail
    return detail


@criterion("schedule exactness")
def test_schedule_exactness():
    cfg = TrainConfig()
    got = [round(lr_schedule(s, cfg), 12) for s in (0, 4999, 10000)]
    assert got == [0.001, 0.001, 0.0009216], got
    return "lr(0)=0.001, lr(4999)=0.001, lr(10000)=0.0009216"


@criterion("determinism")
def test_determinism(tmp_path, capsys):
    data = tmp_path / "data"
    cli.main(["synth", "--out", str(data), "--n-dialogs", "30", "--n-templates", "5", "--seed", "4"])
    lines = []
    for run in ("a", "b"):
        model = tmp_path / f"{run}.ckpt"
        cli.main(["train", "--train", str(data / "train.jsonl"), "--out", str(model), "--steps", "20",
                  "--seed", "4", "--tesim", "on"])
        capsys.readouterr()
        cli.main(["evaluate", "--model", str(model), "--data", str(data / "test.jsonl"),
                  "--train", str(data / "train.jsonl"), "--tesim", "on", "--seed", "4"])
        lines.append(capsys.readouterr().out.strip().splitlines()[-1])
    assert lines[0] == lines[1], lines
    metrics = {k: v for k, v in json.loads(lines[0]).items() if k != "options"}
    return f"identical metric lines {json.dumps(metrics, sort_keys=True)}"


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v", "-s"]))
