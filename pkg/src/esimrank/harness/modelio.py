"""Model construction and checkpoint + JSON sidecar persistence."""
from __future__ import annotations

import dataclasses
import json
from pathlib import Path

from ..autodiff import load_checkpoint, save_checkpoint
from ..corpus import Vocabulary
from ..embedding import load_vectors
from ..esim import ESIM, ModelConfig
from ..kesim import KESIM


def build_model(cfg: ModelConfig, vocab: Vocabulary, vectors_a: str | None = None,
                vectors_b: str | None = None) -> ESIM:
    """ESIM or K-ESIM per ``cfg.variant``; vector files are optional."""
    ta = load_vectors(vectors_a, cfg.emb_dim_a, cfg.seed) if vectors_a else None
    tb = load_vectors(vectors_b, cfg.emb_dim_b, cfg.seed + 1) if vectors_b else None
    cls = KESIM if cfg.variant == "kesim" else ESIM
    model = cls(cfg, vocab, (ta, tb))
    model.vector_files = (vectors_a, vectors_b)
    return model


def sidecar_path(path: str | Path) -> Path:
    return Path(str(path) + ".json")


def save_model(model: ESIM, path: str | Path, extra: dict | None = None) -> None:
    save_checkpoint(path, model.store.state())
    va, vb = getattr(model, "vector_files", (None, None))
    meta = {
        "config": dataclasses.asdict(model.cfg),
        "vocab": model.vocab.to_json(),
        "vectors": [va, vb],
        "extra": extra or {},
    }
    sidecar_path(path).write_text(json.dumps(meta, sort_keys=True), encoding="utf-8")


def load_model(path: str | Path) -> ESIM:
    meta = json.loads(sidecar_path(path).read_text(encoding="utf-8"))
    cfg = ModelConfig(**meta["config"])
    model = build_model(cfg, Vocabulary.from_json(meta["vocab"]), *meta["vectors"])
    model.store.load_state(load_checkpoint(path))
    model.meta = meta.get("extra", {})
    return model
