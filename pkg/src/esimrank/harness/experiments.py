"""Reproducible small experiments on the synthetic corpus.

``overfit_smoke`` checks that a desk-sized ESIM can fit 20 training dialogs
and transfer to held-out dialogs of the same templates.  ``tesim_benefit``
trains baseline ESIM and T-ESIM on the same corpus for several seeds and
compares test R@1.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

from ..corpus import build_vocabulary, load_dataset
from ..tesim import augment_dataset, build_subdialog_index
from .config import build_configs
from .evaluate import EvalOptions, evaluate_subtask
from .modelio import build_model
from .synth import generate_synthetic
from .train import train


@dataclass
class OverfitResult:
    seed: int
    train_fit_step: int | None
    heldout_step: int | None
    best_heldout: float
    steps: int
    seconds: float
    history: list[tuple[int, float, float]] = field(default_factory=list)


def overfit_smoke(workdir: str | Path, seed: int = 0, max_steps: int = 2000, eval_every: int = 50,
                  heldout_target: float = 0.8, log: Callable[[str], None] | None = None) -> OverfitResult:
    """20 train / 40 held-out dialogs over 10 templates, hidden 16.

    Stops as soon as train R@1 has hit 1.0 and held-out R@1 has reached
    ``heldout_target``.
    """
    paths = generate_synthetic(workdir, seed=seed, n_dialogs=60, n_templates=10,
                               fractions=(1 / 3, 1 / 3, 1 / 3))
    train_data = load_dataset(paths["train"])
    heldout = load_dataset(paths["validation"]) + load_dataset(paths["test"])
    mc, tc = build_configs({"seed": seed, "max_steps": max_steps, "log_every": eval_every})
    model = build_model(mc, build_vocabulary(train_data))
    result = OverfitResult(seed, None, None, 0.0, 0, 0.0)

    def on_eval(step, m):
        tr = evaluate_subtask(1, m, train_data).recall_at_1
        ho = evaluate_subtask(1, m, heldout).recall_at_1
        result.history.append((step, tr, ho))
        result.best_heldout = max(result.best_heldout, ho)
        if tr == 1.0 and result.train_fit_step is None:
            result.train_fit_step = step
        if ho >= heldout_target and result.heldout_step is None:
            result.heldout_step = step
        if log:
            log(f"seed {seed} step {step}: train R@1 {tr:.3f}  held-out R@1 {ho:.3f}")
        return result.train_fit_step is not None and result.heldout_step is not None

    t0 = time.perf_counter()
    run = train(tc, train_data, model, eval_every=eval_every, on_eval=on_eval, stop=lambda s, done: done)
    result.steps = run.steps
    result.seconds = time.perf_counter() - t0
    return result


@dataclass
class BenefitRun:
    seed: int
    baseline: float
    tesim: float
    seconds: float


@dataclass
class BenefitResult:
    runs: list[BenefitRun]

    @property
    def mean_baseline(self) -> float:
        return sum(r.baseline for r in self.runs) / len(self.runs)

    @property
    def mean_tesim(self) -> float:
        return sum(r.tesim for r in self.runs) / len(self.runs)

    @property
    def gain(self) -> float:
        return self.mean_tesim - self.mean_baseline


def tesim_benefit(workdir: str | Path, seeds: Sequence[int] = (0, 1, 2), n_dialogs: int = 150,
                  n_templates: int = 40, steps: int = 600, mention_rate: float = 0.0,
                  varied_filler: bool = False, solution_echo: bool = False, overrides: dict | None = None,
                  log: Callable[[str], None] | None = None) -> BenefitResult:
    """Baseline ESIM vs T-ESIM test R@1, one fresh corpus per seed.

    Both arms see the same number of updates.  T-ESIM trains on the
    k=3-augmented training split and evaluates with the top-1 retrieved
    response appended.
    """
    runs = []
    for seed in seeds:
        t0 = time.perf_counter()
        paths = generate_synthetic(Path(workdir) / f"seed{seed}", seed=seed, n_dialogs=n_dialogs,
                                   n_templates=n_templates, mention_rate=mention_rate,
                                   varied_filler=varied_filler, solution_echo=solution_echo)
        train_data = load_dataset(paths["train"])
        test = load_dataset(paths["test"])
        index = build_subdialog_index(ex.dialog() for ex in train_data)
        scores = {}
        for arm, data, opts in (
            ("baseline", train_data, EvalOptions()),
            ("tesim", augment_dataset(train_data, index, "train"), EvalOptions(tesim=True, subdialog_index=index)),
        ):
            mc, tc = build_configs({"seed": seed, "max_steps": steps, **(overrides or {})})
            model = build_model(mc, build_vocabulary(data))
            train(tc, data, model)
            scores[arm] = evaluate_subtask(1, model, test, opts).recall_at_1
            if log:
                log(f"seed {seed} {arm}: test R@1 {scores[arm]:.3f}")
        runs.append(BenefitRun(seed, scores["baseline"], scores["tesim"], time.perf_counter() - t0))
    return BenefitResult(runs)
