"""Dense float64 tensors with a recording tape for reverse-mode gradients.

Ops are plain functions over :class:`Tensor`.  While a :class:`Tape` is
active, every op whose inputs need gradients is appended to it; since nodes
are recorded in creation order, walking the tape backwards is a valid
reverse topological order and each node is visited exactly once.
Outside a tape nothing is recorded, which is the inference fast path.
"""
from __future__ import annotations

import contextvars
import struct
from collections import OrderedDict
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

_ACTIVE_TAPE: contextvars.ContextVar["Tape | None"] = contextvars.ContextVar(
    "active_tape", default=None
)


class ShapeError(ValueError):
    pass


class Tensor:
    __slots__ = ("value", "grad", "requires_grad", "name", "_parents", "_backward")

    def __init__(self, value, requires_grad: bool = False, name: str | None = None):
        self.value = np.asarray(value, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self.name = name
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.value.shape

    @property
    def ndim(self) -> int:
        return self.value.ndim

    def item(self) -> float:
        return float(self.value.reshape(-1)[0])

    def numpy(self) -> np.ndarray:
        return self.value

    def __repr__(self) -> str:
        label = f" {self.name!r}" if self.name else ""
        return f"Tensor{label}(shape={self.shape}, requires_grad={self.requires_grad})"


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


class Tape:
    """Records the computation performed inside a ``with`` block."""

    def __init__(self):
        self.nodes: list[Tensor] = []
        self.visits = 0
        self._token = None

    def __enter__(self) -> "Tape":
        self._token = _ACTIVE_TAPE.set(self)
        return self

    def __exit__(self, *exc) -> None:
        _ACTIVE_TAPE.reset(self._token)
        self._token = None

    def __len__(self) -> int:
        return len(self.nodes)


def _result(value: np.ndarray, parents: tuple[Tensor, ...], backward: Callable) -> Tensor:
    tape = _ACTIVE_TAPE.get()
    if tape is None:
        return Tensor(value)
    for p in parents:
        if p.requires_grad:
            break
    else:
        return Tensor(value)
    out = Tensor(value, requires_grad=True)
    out._parents = parents
    out._backward = backward
    tape.nodes.append(out)
    return out


def backward(tape: Tape, loss: Tensor) -> dict[Tensor, np.ndarray]:
    """Propagate d(loss)/d(node) through ``tape``.

    Gradients are summed into ``.grad`` of every leaf that requires them
    (so a parameter used twice gets both contributions, and repeated calls
    keep accumulating until the caller zeroes them).  Returns the leaf
    gradients keyed by tensor.
    """
    if loss.value.size != 1:
        raise ShapeError(f"backward: loss must be scalar, got shape {loss.shape}")
    loss.grad = np.ones_like(loss.value)
    leaves: dict[Tensor, np.ndarray] = {}
    if loss._backward is None:
        if loss.requires_grad:
            leaves[loss] = loss.grad
        return leaves
    for node in reversed(tape.nodes):
        g = node.grad
        if g is None:
            continue
        tape.visits += 1
        grads = node._backward(g)
        for p, gp in zip(node._parents, grads):
            if gp is None or not p.requires_grad:
                continue
            p.grad = gp if p.grad is None else p.grad + gp
            if p._backward is None:
                leaves[p] = p.grad
        # interior gradients are not needed once propagated
        node.grad = None
    for leaf in leaves:
        leaves[leaf] = leaf.grad
    return leaves


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    if g.shape == shape:
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def _broadcast_check(op: str, a: Tensor, b: Tensor) -> None:
    if a.value.shape == b.value.shape:
        return
    try:
        np.broadcast_shapes(a.value.shape, b.value.shape)
    except ValueError:
        raise ShapeError(f"{op}: incompatible shapes {a.shape} and {b.shape}") from None


# ---------------------------------------------------------------- elementwise


def add(a: Tensor, b: Tensor) -> Tensor:
    _broadcast_check("add", a, b)
    sa, sb = a.value.shape, b.value.shape
    return _result(
        a.value + b.value,
        (a, b),
        lambda g: (_unbroadcast(g, sa), _unbroadcast(g, sb)),
    )


def sub(a: Tensor, b: Tensor) -> Tensor:
    _broadcast_check("sub", a, b)
    sa, sb = a.value.shape, b.value.shape
    return _result(
        a.value - b.value,
        (a, b),
        lambda g: (_unbroadcast(g, sa), _unbroadcast(-g, sb)),
    )


def mul(a: Tensor, b: Tensor) -> Tensor:
    _broadcast_check("elemwise_mul", a, b)
    av, bv = a.value, b.value

    def grad(g):
        return (
            _unbroadcast(g * bv, av.shape) if a.requires_grad else None,
            _unbroadcast(g * av, bv.shape) if b.requires_grad else None,
        )

    return _result(av * bv, (a, b), grad)


def scale(a: Tensor, c: float) -> Tensor:
    return _result(a.value * c, (a,), lambda g: (g * c,))


def tanh(a: Tensor) -> Tensor:
    y = np.tanh(a.value)
    return _result(y, (a,), lambda g: (g * (1.0 - y * y),))


def _sigmoid(x: np.ndarray) -> np.ndarray:
    # tanh form never overflows
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def sigmoid(a: Tensor) -> Tensor:
    y = _sigmoid(a.value)
    return _result(y, (a,), lambda g: (g * y * (1.0 - y),))


def relu(a: Tensor) -> Tensor:
    on = a.value > 0
    return _result(np.where(on, a.value, 0.0), (a,), lambda g: (g * on,))


def log(a: Tensor) -> Tensor:
    av = a.value
    return _result(np.log(av), (a,), lambda g: (g / av,))


def clip(a: Tensor, lo: float, hi: float) -> Tensor:
    inside = (a.value >= lo) & (a.value <= hi)
    return _result(np.clip(a.value, lo, hi), (a,), lambda g: (g * inside,))


def where(mask: np.ndarray, a: Tensor, b: Tensor) -> Tensor:
    """Select ``a`` where the constant boolean ``mask`` holds, else ``b``."""
    _broadcast_check("where", a, b)
    sa, sb = a.value.shape, b.value.shape
    return _result(
        np.where(mask, a.value, b.value),
        (a, b),
        lambda g: (
            _unbroadcast(np.where(mask, g, 0.0), sa),
            _unbroadcast(np.where(mask, 0.0, g), sb),
        ),
    )


# ---------------------------------------------------------------- linear algebra


def _swap(x: np.ndarray) -> np.ndarray:
    return np.swapaxes(x, -1, -2)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    av, bv = a.value, b.value
    if av.ndim < 2 or bv.ndim < 2 or av.shape[-1] != bv.shape[-2]:
        raise ShapeError(f"matmul: cannot multiply {a.shape} by {b.shape}")

    def grad(g):
        ga = gb = None
        if a.requires_grad:
            ga = _unbroadcast(g @ _swap(bv), av.shape)
        if b.requires_grad:
            if bv.ndim == 2 and av.ndim > 2:
                gb = av.reshape(-1, av.shape[-1]).T @ g.reshape(-1, g.shape[-1])
            else:
                gb = _unbroadcast(_swap(av) @ g, bv.shape)
        return ga, gb

    return _result(av @ bv, (a, b), grad)


def transpose(a: Tensor) -> Tensor:
    """Swap the last two axes."""
    return _result(_swap(a.value), (a,), lambda g: (_swap(g),))


def reshape(a: Tensor, shape: tuple[int, ...]) -> Tensor:
    old = a.value.shape
    return _result(a.value.reshape(shape), (a,), lambda g: (g.reshape(old),))


# ---------------------------------------------------------------- structure


def concat(ts: Sequence[Tensor], axis: int = -1) -> Tensor:
    ts = tuple(ts)
    if not ts:
        raise ShapeError("concat: no inputs")
    nd = ts[0].value.ndim
    ax = axis % nd
    for t in ts[1:]:
        s0, s1 = ts[0].value.shape, t.value.shape
        if t.value.ndim != nd or s0[:ax] + s0[ax + 1:] != s1[:ax] + s1[ax + 1:]:
            raise ShapeError(
                f"concat: shapes {[x.shape for x in ts]} differ off axis {axis}"
            )
    sizes = [t.value.shape[ax] for t in ts]
    bounds = np.cumsum(sizes)[:-1]
    return _result(
        np.concatenate([t.value for t in ts], axis=ax),
        ts,
        lambda g: tuple(np.split(g, bounds, axis=ax)),
    )


def stack(ts: Sequence[Tensor], axis: int = 0) -> Tensor:
    ts = tuple(ts)
    shapes = {t.value.shape for t in ts}
    if len(shapes) != 1:
        raise ShapeError(f"stack: unequal shapes {sorted(shapes)}")
    out = np.stack([t.value for t in ts], axis=axis)
    ax = axis % out.ndim
    n = len(ts)
    return _result(
        out, ts, lambda g: tuple(np.take(g, i, axis=ax) for i in range(n))
    )


def getitem(a: Tensor, key) -> Tensor:
    shape = a.value.shape

    def grad(g):
        full = np.zeros(shape)
        full[key] = g
        return (full,)

    return _result(a.value[key], (a,), grad)


def _scatter_rows(idx: np.ndarray, rows: np.ndarray, shape) -> np.ndarray:
    """Sum ``rows`` into a zero array of ``shape`` at row positions ``idx``."""
    full = np.zeros(shape)
    if idx.size == 0:
        return full
    order = np.argsort(idx, kind="stable")
    sorted_idx = idx[order]
    starts = np.flatnonzero(np.r_[True, sorted_idx[1:] != sorted_idx[:-1]])
    full[sorted_idx[starts]] = np.add.reduceat(rows[order], starts, axis=0)
    return full


def take(a: Tensor, idx: np.ndarray, axis: int = 0) -> Tensor:
    """Gather along ``axis`` (embedding lookup); repeated indices accumulate."""
    idx = np.asarray(idx, dtype=np.intp)
    shape = a.value.shape
    ax = axis % a.value.ndim

    def grad(g):
        if ax != 0:
            full = np.zeros(shape)
            moved = np.moveaxis(full, ax, 0)
            np.add.at(moved, idx, np.moveaxis(g, ax + idx.ndim - 1, 0))
            return (full,)
        return (_scatter_rows(idx.reshape(-1), g.reshape((idx.size,) + shape[1:]), shape),)

    return _result(np.take(a.value, idx, axis=ax), (a,), grad)


# ---------------------------------------------------------------- reductions


def softmax(a: Tensor, mask: np.ndarray | None = None) -> Tensor:
    """Softmax over the last axis; ``mask`` (broadcastable, bool) keeps entries.

    Max-subtraction keeps exp finite.  Masked entries get weight exactly 0.
    """
    x = a.value
    if mask is not None:
        x = np.where(mask, x, -np.inf)
    shift = np.max(x, axis=-1, keepdims=True)
    e = np.exp(x - shift)
    y = e / e.sum(axis=-1, keepdims=True)

    def grad(g):
        return (y * (g - (g * y).sum(axis=-1, keepdims=True)),)

    return _result(y, (a,), grad)


def max_over_rows(a: Tensor, mask: np.ndarray | None = None) -> Tensor:
    """Column-wise max over axis -2; rows where ``mask`` is False are ignored."""
    x = a.value
    if mask is not None:
        x = np.where(mask[..., None], x, -np.inf)
    arg = np.argmax(x, axis=-2)
    out = np.take_along_axis(x, arg[..., None, :], axis=-2)[..., 0, :]
    shape = a.value.shape

    def grad(g):
        full = np.zeros(shape)
        np.put_along_axis(full, arg[..., None, :], g[..., None, :], axis=-2)
        return (full,)

    return _result(out, (a,), grad)


def mean(a: Tensor) -> Tensor:
    n = a.value.size
    shape = a.value.shape
    return _result(
        np.asarray(a.value.mean()), (a,), lambda g: (np.full(shape, g / n),)
    )


def sum_all(a: Tensor) -> Tensor:
    shape = a.value.shape
    return _result(np.asarray(a.value.sum()), (a,), lambda g: (np.full(shape, g),))


OPS: dict[str, Callable[..., Tensor]] = {
    "matmul": matmul,
    "add": add,
    "sub": sub,
    "elemwise_mul": mul,
    "concat": lambda *ts: concat(ts, axis=-1),
    "softmax_rows": softmax,
    "tanh": tanh,
    "sigmoid": sigmoid,
    "relu": relu,
    "max_over_rows": max_over_rows,
    "mean": mean,
}


def apply(op: str, inputs: Sequence[Tensor]) -> Tensor:
    """Evaluate a primitive by name."""
    try:
        fn = OPS[op]
    except KeyError:
        raise ValueError(f"unknown op {op!r}") from None
    return fn(*[as_tensor(x) for x in inputs])


# ---------------------------------------------------------------- parameters


class ParamStore:
    """Named, seeded parameter registry."""

    def __init__(self, seed: int = 0, init_scale: float = 0.05):
        self.params: OrderedDict[str, Tensor] = OrderedDict()
        self.rng = np.random.default_rng(seed)
        self.init_scale = init_scale

    def add(self, name: str, shape: tuple[int, ...], init="uniform") -> Tensor:
        if name in self.params:
            raise KeyError(f"parameter {name!r} already registered")
        if isinstance(init, np.ndarray):
            value = np.array(init, dtype=np.float64).reshape(shape)
        elif init == "uniform":
            value = self.rng.uniform(-self.init_scale, self.init_scale, size=shape)
        elif init == "zeros":
            value = np.zeros(shape)
        else:
            raise ValueError(f"unknown init {init!r}")
        t = Tensor(value, requires_grad=True, name=name)
        self.params[name] = t
        return t

    def __getitem__(self, name: str) -> Tensor:
        return self.params[name]

    def __contains__(self, name: str) -> bool:
        return name in self.params

    def __iter__(self):
        return iter(self.params.values())

    def __len__(self) -> int:
        return len(self.params)

    def names(self) -> list[str]:
        return list(self.params)

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.grad = None

    def size(self) -> int:
        return sum(p.value.size for p in self.params.values())

    def state(self) -> dict[str, np.ndarray]:
        return {k: v.value.copy() for k, v in self.params.items()}

    def load_state(self, state: dict[str, np.ndarray]) -> None:
        missing = set(self.params) - set(state)
        if missing:
            raise KeyError(f"checkpoint lacks parameters: {sorted(missing)}")
        for k, p in self.params.items():
            if state[k].shape != p.value.shape:
                raise ShapeError(
                    f"parameter {k!r}: checkpoint shape {state[k].shape} != {p.value.shape}"
                )
            p.value = np.array(state[k], dtype=np.float64)


# ---------------------------------------------------------------- checkpoints

CHECKPOINT_MAGIC = b"ESIMCKPT"
CHECKPOINT_VERSION = 1


def save_checkpoint(path: str | Path, state: dict[str, np.ndarray]) -> None:
    """Write a named-parameter table: header, then per entry name/shape/<f8 data."""
    chunks = [CHECKPOINT_MAGIC, struct.pack("<II", CHECKPOINT_VERSION, len(state))]
    for name, arr in state.items():
        raw = name.encode("utf-8")
        arr = np.asarray(arr, dtype="<f8")
        chunks.append(struct.pack("<H", len(raw)) + raw)
        chunks.append(struct.pack("<B", arr.ndim))
        chunks.append(struct.pack(f"<{arr.ndim}Q", *arr.shape))
        chunks.append(arr.tobytes(order="C"))
    Path(path).write_bytes(b"".join(chunks))


def load_checkpoint(path: str | Path) -> OrderedDict[str, np.ndarray]:
    buf = Path(path).read_bytes()
    if buf[:8] != CHECKPOINT_MAGIC:
        raise ValueError(f"{path}: not a checkpoint file")
    version, count = struct.unpack_from("<II", buf, 8)
    if version != CHECKPOINT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {version}")
    pos = 16
    state: OrderedDict[str, np.ndarray] = OrderedDict()
    for _ in range(count):
        (n,) = struct.unpack_from("<H", buf, pos)
        pos += 2
        name = buf[pos:pos + n].decode("utf-8")
        pos += n
        (ndim,) = struct.unpack_from("<B", buf, pos)
        pos += 1
        shape = struct.unpack_from(f"<{ndim}Q", buf, pos)
        pos += 8 * ndim
        size = int(np.prod(shape, dtype=np.int64))
        arr = np.frombuffer(buf, dtype="<f8", count=size, offset=pos).reshape(shape)
        pos += 8 * size
        state[name] = arr.astype(np.float64)
    return state


# ---------------------------------------------------------------- checking


def _scalar(t: Tensor) -> float:
    v = float(np.asarray(t.value).reshape(-1)[0])
    if not np.isfinite(v):
        raise FloatingPointError(f"gradient_check: objective is not finite ({v})")
    return v


def gradient_check(
    f: Callable[[], Tensor],
    params: Iterable[Tensor],
    eps: float = 1e-5,
    analytic: dict[Tensor, np.ndarray] | None = None,
    floor: float = 1e-3,
) -> float:
    """Worst relative error between analytic and central-difference gradients.

    The error for each entry is ``|a - n| / max(|a|, |n|, floor)``; the floor
    keeps entries whose true gradient is ~0 from being judged on rounding noise.
    ``analytic`` overrides the tape gradients (used for negative controls).
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    params = list(params)
    if analytic is None:
        for p in params:
            p.grad = None
        with Tape() as tape:
            loss = f()
        _scalar(loss)
        analytic = backward(tape, loss)
    worst = 0.0
    for p in params:
        p.value = np.ascontiguousarray(p.value)
        a = analytic.get(p)
        a = np.zeros_like(p.value) if a is None else np.asarray(a).reshape(p.value.shape)
        flat = p.value.reshape(-1)
        aflat = a.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            fp = _scalar(f())
            flat[i] = orig - eps
            fm = _scalar(f())
            flat[i] = orig
            num = (fp - fm) / (2.0 * eps)
            err = abs(aflat[i] - num) / max(abs(aflat[i]), abs(num), floor)
            worst = max(worst, err)
    return worst
