"""Dense float64/complex128 tensors with reverse-mode autodiff.

Ops record onto the innermost active GradTape when any input is tracked;
``backward`` replays the tape in reverse execution order (a valid reverse
topological order, since every output is recorded after its parents) and
clears it. Gradients are float64 only; complex tensors are forward-only
containers for the spectral code.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np


class Tensor:
    """A numpy array plus gradient metadata."""

    __slots__ = ("data", "requires_grad", "grad")

    def __init__(self, data, requires_grad: bool = False):
        arr = np.asarray(data)
        if arr.dtype.kind == "c":
            arr = arr.astype(np.complex128)
            if requires_grad:
                raise ValueError("complex tensors are not gradient-capable")
        else:
            arr = arr.astype(np.float64)
        self.data = arr
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"


@dataclass
class _Node:
    out: Tensor
    parents: tuple[Tensor, ...]
    backward: Callable[[np.ndarray], tuple[np.ndarray | None, ...]]


class GradTape:
    """Execution-order op recording; used as a context manager."""

    def __init__(self):
        self.nodes: list[_Node] = []
        self._tracked: set[int] = set()

    def watches(self, t: Tensor) -> bool:
        return t.requires_grad or id(t) in self._tracked

    def clear(self) -> None:
        self.nodes.clear()
        self._tracked.clear()

    def __enter__(self) -> "GradTape":
        _tape_stack().append(self)
        return self

    def __exit__(self, *exc) -> None:
        _tape_stack().remove(self)


_tls = threading.local()


def _tape_stack() -> list[GradTape]:
    if not hasattr(_tls, "stack"):
        _tls.stack = []
    return _tls.stack


def active_tape() -> GradTape | None:
    stack = _tape_stack()
    return stack[-1] if stack else None


def _record(out: Tensor, parents: tuple[Tensor, ...], backward) -> Tensor:
    tape = active_tape()
    if tape is not None and any(tape.watches(p) for p in parents):
        tape.nodes.append(_Node(out, parents, backward))
        tape._tracked.add(id(out))
    return out


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum a broadcast gradient back down to the original shape."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, dim in enumerate(shape):
        if dim == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def backward(loss: Tensor, tape: GradTape | None = None) -> dict[int, np.ndarray]:
    """Accumulate d(loss)/d(leaf) into every requires_grad leaf's .grad.

    Returns {id(leaf): grad}. The tape is cleared afterwards.
    """
    tape = tape or active_tape()
    if tape is None or not tape.nodes:
        raise ValueError("no recorded operations to differentiate")
    if loss.size != 1:
        raise ValueError(f"loss must be scalar, got shape {loss.shape}")
    grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    leaf_grads: dict[int, np.ndarray] = {}
    for node in reversed(tape.nodes):
        g = grads.pop(id(node.out), None)
        if g is None:
            continue
        for parent, pg in zip(node.parents, node.backward(g)):
            if pg is None:
                continue
            if parent.requires_grad:
                if parent.grad is None:
                    parent.grad = np.zeros_like(parent.data)
                parent.grad += pg
                leaf_grads[id(parent)] = parent.grad
            elif tape.watches(parent):
                key = id(parent)
                if key in grads:
                    grads[key] = grads[key] + pg
                else:
                    grads[key] = pg
    tape.clear()
    return leaf_grads


# --- core ops ----------------------------------------------------------------

def _require_same_shape(a: Tensor, b: Tensor, op: str) -> None:
    if a.shape != b.shape:
        raise ValueError(f"{op}: shape mismatch {a.shape} vs {b.shape}")


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.shape[-1] != b.shape[-2 if b.data.ndim > 1 else 0]:
        raise ValueError(f"matmul: inner dims disagree {a.shape} @ {b.shape}")
    out = Tensor(np.matmul(a.data, b.data))

    def back(g):
        swap_b = np.swapaxes(b.data, -1, -2)
        swap_a = np.swapaxes(a.data, -1, -2)
        ga = _unbroadcast(np.matmul(g, swap_b), a.shape)
        gb = _unbroadcast(np.matmul(swap_a, g), b.shape)
        return ga, gb

    return _record(out, (a, b), back)


def add(a: Tensor, b: Tensor) -> Tensor:
    out = Tensor(a.data + b.data)

    def back(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return _record(out, (a, b), back)


def mul(a: Tensor, b: Tensor) -> Tensor:
    out = Tensor(a.data * b.data)

    def back(g):
        return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)

    return _record(out, (a, b), back)


def scale(a: Tensor, s: float) -> Tensor:
    out = Tensor(a.data * s)
    return _record(out, (a,), lambda g: (g * s,))


def relu(a: Tensor) -> Tensor:
    out = Tensor(np.maximum(a.data, 0.0))
    return _record(out, (a,), lambda g: (g * (a.data > 0.0),))


def softmax(a: Tensor, axis: int = -1) -> Tensor:
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=axis, keepdims=True)
    out = Tensor(y)

    def back(g):
        inner = (g * y).sum(axis=axis, keepdims=True)
        return ((g - inner) * y,)

    return _record(out, (a,), back)


def layer_norm(a: Tensor, axis: int = -1, eps: float = 1e-5) -> Tensor:
    mu = a.data.mean(axis=axis, keepdims=True)
    var = a.data.var(axis=axis, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (a.data - mu) * inv
    out = Tensor(xhat)

    def back(g):
        gmean = g.mean(axis=axis, keepdims=True)
        gxhat = (g * xhat).mean(axis=axis, keepdims=True)
        return (inv * (g - gmean - xhat * gxhat),)

    return _record(out, (a,), back)


def embedding_lookup(table: Tensor, ids: np.ndarray) -> Tensor:
    ids = np.asarray(ids)
    if ids.size and (ids.min() < 0 or ids.max() >= table.shape[0]):
        raise ValueError(f"embedding ids outside [0, {table.shape[0]})")
    out = Tensor(table.data[ids])

    def back(g):
        gt = np.zeros_like(table.data)
        np.add.at(gt, ids, g)
        return (gt,)

    return _record(out, (table,), back)


def transpose(a: Tensor, axes: tuple[int, ...] | None = None) -> Tensor:
    out = Tensor(np.transpose(a.data, axes))
    if axes is None:
        inverse = None
    else:
        inverse = tuple(int(np.argsort(axes)[i]) for i in range(len(axes)))
    return _record(out, (a,), lambda g: (np.transpose(g, inverse),))


def reshape(a: Tensor, shape: tuple[int, ...]) -> Tensor:
    out = Tensor(a.data.reshape(shape))
    return _record(out, (a,), lambda g: (g.reshape(a.shape),))


def slice_(a: Tensor, key) -> Tensor:
    """Basic (view) slicing only; advanced integer-array indexing is not
    supported because its backward needs scatter semantics."""
    out = Tensor(a.data[key])

    def back(g):
        ga = np.zeros_like(a.data)
        ga[key] += g
        return (ga,)

    return _record(out, (a,), back)


def concat(tensors: list[Tensor], axis: int = 0) -> Tensor:
    out = Tensor(np.concatenate([t.data for t in tensors], axis=axis))
    sizes = [t.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def back(g):
        slicer = [slice(None)] * g.ndim
        pieces = []
        for i in range(len(sizes)):
            slicer[axis] = slice(offsets[i], offsets[i + 1])
            pieces.append(g[tuple(slicer)])
        return tuple(pieces)

    return _record(out, tuple(tensors), back)


def sum_(a: Tensor, axis: int | None = None, keepdims: bool = False) -> Tensor:
    out = Tensor(a.data.sum(axis=axis, keepdims=keepdims))

    def back(g):
        if axis is None:
            return (np.broadcast_to(g, a.shape).copy(),)
        gg = g if keepdims else np.expand_dims(g, axis)
        return (np.broadcast_to(gg, a.shape).copy(),)

    return _record(out, (a,), back)


def cross_entropy(logits: Tensor, targets: np.ndarray,
                  ignore_index: int | None = None) -> Tensor:
    """Mean negative log-likelihood over non-ignored targets.

    logits: (..., V); targets: integer array of the leading shape.
    """
    targets = np.asarray(targets)
    if targets.shape != logits.shape[:-1]:
        raise ValueError(
            f"cross_entropy: targets {targets.shape} vs logits {logits.shape}")
    flat = logits.data.reshape(-1, logits.shape[-1])
    tgt = targets.reshape(-1)
    keep = np.ones_like(tgt, dtype=bool) if ignore_index is None else tgt != ignore_index
    count = int(keep.sum())
    if count == 0:
        raise ValueError("cross_entropy: every target is ignored")
    shifted = flat - flat.max(axis=1, keepdims=True)
    logz = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    logp = shifted - logz
    picked = logp[np.arange(flat.shape[0]), np.where(keep, tgt, 0)]
    loss = -(picked * keep).sum() / count
    out = Tensor(loss)

    def back(g):
        probs = np.exp(logp)
        grad = probs.copy()
        grad[np.arange(flat.shape[0]), np.where(keep, tgt, 0)] -= 1.0
        grad *= keep[:, None]
        grad *= float(g) / count
        return (grad.reshape(logits.shape),)

    return _record(out, (logits,), back)


# --- optimizer ----------------------------------------------------------------

@dataclass
class AdamState:
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(
    params: dict[str, Tensor],
    grads: dict[str, np.ndarray],
    state: AdamState,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> AdamState:
    """In-place Adam update with bias correction."""
    state.step += 1
    t = state.step
    for name, p in params.items():
        g = grads.get(name)
        if g is None:
            continue
        if g.shape != p.shape:
            raise ValueError(f"adam_step: grad {g.shape} vs param {p.shape} for {name!r}")
        m = state.m.setdefault(name, np.zeros_like(p.data))
        v = state.v.setdefault(name, np.zeros_like(p.data))
        m += (1.0 - beta1) * (g - m)
        v += (1.0 - beta2) * (g * g - v)
        mhat = m / (1.0 - beta1 ** t)
        vhat = v / (1.0 - beta2 ** t)
        p.data -= lr * mhat / (np.sqrt(vhat) + eps)
    return state


# --- checkpoints --------------------------------------------------------------

def save_checkpoint(path: str | Path, params: dict[str, Tensor | np.ndarray],
                    meta: dict | None = None) -> None:
    """Text manifest (name -> shape, plus free-form meta) followed by the
    concatenated parameter data as little-endian float64."""
    entries = []
    blobs = []
    for name, p in params.items():
        arr = p.data if isinstance(p, Tensor) else np.asarray(p, dtype=np.float64)
        entries.append({"name": name, "shape": list(arr.shape)})
        blobs.append(arr.astype("<f8").tobytes())
    manifest = json.dumps({"tensors": entries, "meta": meta or {}})
    head = manifest.encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(str(len(head)).encode("ascii") + b"\n")
        fh.write(head + b"\n")
        fh.write(b"".join(blobs))


def load_checkpoint(path: str | Path) -> tuple[dict[str, np.ndarray], dict]:
    raw = Path(path).read_bytes()
    nl = raw.index(b"\n")
    head_len = int(raw[:nl])
    head = json.loads(raw[nl + 1:nl + 1 + head_len].decode("utf-8"))
    offset = nl + 1 + head_len + 1
    params: dict[str, np.ndarray] = {}
    for entry in head["tensors"]:
        shape = tuple(entry["shape"])
        n = int(np.prod(shape)) if shape else 1
        arr = np.frombuffer(raw, dtype="<f8", count=n, offset=offset).reshape(shape)
        params[entry["name"]] = arr.astype(np.float64)
        offset += n * 8
    return params, head.get("meta", {})
