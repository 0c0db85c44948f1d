"""Adam training loop with a staircase learning-rate schedule."""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable, Iterator, Sequence

import numpy as np

from ..autodiff import ParamStore, Tape, backward
from ..corpus import Candidate, Example
from ..esim import ESIM, make_batch
from .config import TrainConfig


class TrainingDiverged(RuntimeError):
    pass


def lr_schedule(step: int, cfg: TrainConfig) -> float:
    """lr0 * decay_rate ** floor(step / decay_every)."""
    if step < 0:
        raise ValueError("step must be >= 0")
    return cfg.lr0 * cfg.decay_rate ** (step // cfg.decay_every)


class Adam:
    def __init__(self, store: ParamStore, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = list(store)
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m = [np.zeros_like(p.value) for p in self.params]
        self.v = [np.zeros_like(p.value) for p in self.params]
        self.t = 0

    def step(self, grads: dict, lr: float) -> None:
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for p, m, v in zip(self.params, self.m, self.v):
            g = grads.get(p)
            if g is None:
                continue
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p.value -= lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def training_pairs(examples: Sequence[Example]) -> list[tuple[Example, Candidate, float]]:
    pairs = []
    for ex in examples:
        for c in ex.candidates:
            pairs.append((ex, c, 1.0 if c.id in ex.correct_ids else 0.0))
    return pairs


def batch_indices(n: int, batch_size: int, seed: int) -> Iterator[np.ndarray]:
    """Endless stream of batches: one seeded permutation per epoch, chained."""
    rng = np.random.default_rng(seed)
    buf = np.empty(0, dtype=np.intp)
    while True:
        while len(buf) < batch_size:
            buf = np.concatenate([buf, rng.permutation(n)])
        yield buf[:batch_size]
        buf = buf[batch_size:]


@dataclass
class TrainResult:
    steps: int
    loss_log: list[tuple[int, float]] = field(default_factory=list)
    history: list[tuple[int, object]] = field(default_factory=list)
    seconds: float = 0.0
    stopped_early: bool = False


EvalHook = Callable[[int, ESIM], object]


def train(cfg: TrainConfig, data: Sequence[Example], model: ESIM, *,
          eval_every: int = 0, on_eval: EvalHook | None = None,
          stop: Callable[[int, object], bool] | None = None,
          log: Callable[[str], None] | None = None) -> TrainResult:
    """Minimise mean BCE over (context, candidate, label) pairs.

    ``on_eval(step, model)`` runs every ``eval_every`` steps; its return
    value is kept in ``history`` and, if ``stop(step, value)`` says so,
    training ends there.
    """
    pairs = training_pairs(data)
    if not pairs:
        raise ValueError("train: no training pairs")
    opt = Adam(model.store, cfg.beta1, cfg.beta2, cfg.adam_eps)
    result = TrainResult(0)
    batches = batch_indices(len(pairs), min(cfg.batch_size, len(pairs)), cfg.seed)
    t0 = time.perf_counter()
    window: list[float] = []
    for step in range(cfg.max_steps):
        idx = next(batches)
        chosen = [pairs[i] for i in idx]
        batch = make_batch([(ex, c) for ex, c, _ in chosen], model.cfg, [y for _, _, y in chosen])
        model.store.zero_grad()
        with Tape() as tape:
            loss = model.loss(batch)
        value = loss.item()
        if not math.isfinite(value):
            raise TrainingDiverged(
                f"non-finite loss {value} at step {step} (lr {lr_schedule(step, cfg):.3g}, "
                f"batch examples {sorted({ex.example_id for ex, _, _ in chosen})})"
            )
        grads = backward(tape, loss)
        opt.step(grads, lr_schedule(step, cfg))
        window.append(value)
        result.steps = step + 1
        if result.steps % cfg.log_every == 0 or result.steps == cfg.max_steps:
            result.loss_log.append((result.steps, float(np.mean(window))))
            if log:
                log(f"step {result.steps} loss {result.loss_log[-1][1]:.5f}")
            window = []
        if on_eval and eval_every and result.steps % eval_every == 0:
            value = on_eval(result.steps, model)
            result.history.append((result.steps, value))
            if stop and stop(result.steps, value):
                result.stopped_early = True
                break
    result.seconds = time.perf_counter() - t0
    return result
