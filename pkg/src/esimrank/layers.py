"""Recurrent and dense layers built from autodiff primitives.

Sequences are batched as ``(B, T, D)`` tensors with a boolean ``(B, T)``
mask; padding is always on the right.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import ParamStore, Tensor


@dataclass
class LSTMParams:
    W: Tensor  # (D, 4H) input weights, gate order i, f, o, g
    U: Tensor  # (H, 4H) recurrent weights
    b: Tensor  # (4H,)

    @property
    def hidden(self) -> int:
        return self.U.shape[0]


def make_lstm(store: ParamStore, prefix: str, input_dim: int, hidden: int) -> LSTMParams:
    bias = np.zeros(4 * hidden)
    bias[hidden:2 * hidden] = 1.0  # forget gate
    return LSTMParams(
        W=store.add(f"{prefix}.W", (input_dim, 4 * hidden)),
        U=store.add(f"{prefix}.U", (hidden, 4 * hidden)),
        b=store.add(f"{prefix}.b", (4 * hidden,), init=bias),
    )


@dataclass
class BiLSTMParams:
    fwd: LSTMParams
    bwd: LSTMParams

    @property
    def hidden(self) -> int:
        return self.fwd.hidden


def make_bilstm(store: ParamStore, prefix: str, input_dim: int, hidden: int) -> BiLSTMParams:
    return BiLSTMParams(
        make_lstm(store, f"{prefix}.fwd", input_dim, hidden),
        make_lstm(store, f"{prefix}.bwd", input_dim, hidden),
    )


def lstm_scan(x: Tensor, mask: np.ndarray, p: LSTMParams, reverse: bool = False):
    """Run one LSTM direction over ``x`` (B, T, D).

    Padded steps carry the previous state through unchanged, so the state
    after the loop is the state at the last valid step (forward) or at
    position 0 (reverse).  Returns ``(outputs (B, T, H), final (B, H))``.
    """
    B, T, _ = x.shape
    H = p.hidden
    proj = ad.add(ad.matmul(x, p.W), p.b)
    h = Tensor(np.zeros((B, H)))
    c = Tensor(np.zeros((B, H)))
    outs: list[Tensor | None] = [None] * T
    steps = range(T - 1, -1, -1) if reverse else range(T)
    for t in steps:
        z = ad.add(ad.getitem(proj, (slice(None), t)), ad.matmul(h, p.U))
        gates = ad.sigmoid(ad.getitem(z, (slice(None), slice(0, 3 * H))))
        cand = ad.tanh(ad.getitem(z, (slice(None), slice(3 * H, 4 * H))))
        i = ad.getitem(gates, (slice(None), slice(0, H)))
        f = ad.getitem(gates, (slice(None), slice(H, 2 * H)))
        o = ad.getitem(gates, (slice(None), slice(2 * H, 3 * H)))
        c_new = ad.add(ad.mul(f, c), ad.mul(i, cand))
        h_new = ad.mul(o, ad.tanh(c_new))
        m = mask[:, t:t + 1]
        if m.all():
            c, h = c_new, h_new
        else:
            c = ad.where(m, c_new, c)
            h = ad.where(m, h_new, h)
        outs[t] = h
    return ad.stack(outs, axis=1), h


def bilstm(x: Tensor, mask: np.ndarray, p: BiLSTMParams):
    """Bidirectional LSTM; returns ``(outputs (B, T, 2H), final (B, 2H))``.

    ``final`` is the forward state at the last valid step concatenated with
    the backward state at step 0.
    """
    if x.shape[1] == 0:
        raise ad.ShapeError("bilstm: zero-length input")
    out_f, last_f = lstm_scan(x, mask, p.fwd)
    out_b, last_b = lstm_scan(x, mask, p.bwd, reverse=True)
    return ad.concat([out_f, out_b], axis=-1), ad.concat([last_f, last_b], axis=-1)


def pad_time(x: Tensor, length: int) -> Tensor:
    extra = length - x.shape[1]
    if extra == 0:
        return x
    zeros = Tensor(np.zeros((x.shape[0], extra) + x.shape[2:]))
    return ad.concat([x, zeros], axis=1)


def bilstm_many(seqs: list[tuple[Tensor, np.ndarray]], p: BiLSTMParams):
    """Run several padded batches through one BiLSTM in a single scan.

    Each entry is ``(x (B_k, T_k, D), mask (B_k, T_k))``.  Batches are padded
    to a common length and stacked, which gives identical results to separate
    calls while recording far fewer tape nodes.
    """
    T = max(x.shape[1] for x, _ in seqs)
    xs, masks, sizes = [], [], []
    for x, m in seqs:
        xs.append(pad_time(x, T))
        masks.append(np.pad(m, ((0, 0), (0, T - m.shape[1]))))
        sizes.append((x.shape[0], x.shape[1]))
    x_all = xs[0] if len(xs) == 1 else ad.concat(xs, axis=0)
    out, last = bilstm(x_all, np.concatenate(masks, axis=0), p)
    results = []
    start = 0
    for b, t in sizes:
        rows = slice(start, start + b)
        results.append(
            (ad.getitem(out, (rows, slice(0, t))), ad.getitem(last, (rows,)))
        )
        start += b
    return results


@dataclass
class DenseParams:
    W: Tensor
    b: Tensor


def make_dense(store: ParamStore, prefix: str, n_in: int, n_out: int) -> DenseParams:
    return DenseParams(
        store.add(f"{prefix}.W", (n_in, n_out)), store.add(f"{prefix}.b", (n_out,), init="zeros")
    )


def dense(x: Tensor, p: DenseParams) -> Tensor:
    return ad.add(ad.matmul(x, p.W), p.b)
