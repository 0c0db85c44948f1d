"""Finite-difference check of a tiny ESIM or K-ESIM on a fixed toy batch."""
from __future__ import annotations

import numpy as np

from .. import autodiff as ad
from ..corpus import Candidate, Example, Utterance, build_vocabulary
from ..esim import ESIM, ModelConfig, PairBatch, make_batch
from ..kesim import KESIM

TINY = dict(hidden=4, mlp_hidden=5, emb_dim_a=3, emb_dim_b=2, char_dim=4, char_emb_dim=3, init_scale=0.5)


def tiny_problem(variant: str = "esim", seed: int = 0, untie: bool = False) -> tuple[ESIM, PairBatch]:
    """Two examples, three candidates each, every sequence at most 5 tokens."""
    rng = np.random.default_rng(seed)
    words = [f"w{i}" for i in range(8)]
    sent = lambda n: " ".join(rng.choice(words, n))
    exs = []
    for k in range(2):
        cands = tuple(Candidate(f"c{j}", sent(2 + j)) for j in range(3))
        exs.append(Example(f"d{k}", (Utterance("A", sent(3)),), cands, frozenset(["c0"]),
                           knowledge=tuple(sent(4).split())))
    cfg = ModelConfig(variant=variant, seed=seed, untie_knowledge_encoder=untie, **TINY)
    model = (KESIM if variant == "kesim" else ESIM)(cfg, build_vocabulary(exs))
    pairs = [(e, c) for e in exs for c in e.candidates]
    return model, make_batch(pairs, cfg, [float(c.id == "c0") for _, c in pairs])


def tiny_gradcheck(variant: str = "esim", seed: int = 0) -> tuple[float, int]:
    """(max relative error, number of scalar parameters checked)."""
    model, batch = tiny_problem(variant, seed)
    err = ad.gradient_check(lambda: model.loss(batch), list(model.store))
    return err, model.store.size()
