"""Dense float64 tensors with reverse-mode differentiation on an explicit tape.

The tape is a Wengert list: nodes are appended in execution order and the
backward sweep visits them in strict reverse append order. Values are numpy
arrays; any operation whose result contains NaN/Inf raises NumericalError.

Gradients for row-gather and column-sparse products travel as SparseRows /
SparseCols carriers so that large embedding / projection matrices never get a
dense per-document gradient allocation.
"""

from __future__ import annotations

from typing import Callable, Optional, Sequence

import numpy as np

from .errors import ContractError, NumericalError, ShapeError
from .rng import Rng


def _check_finite(data: np.ndarray) -> np.ndarray:
    # cheap single-pass probe: any inf/nan poisons the sum; the exact check
    # runs only on suspicion (a finite-but-overflowing sum is not an error)
    with np.errstate(over="ignore", invalid="ignore"):
        suspicious = not np.isfinite(np.sum(data))
    if suspicious and not np.all(np.isfinite(data)):
        raise NumericalError("non-finite value produced by tensor operation")
    return data


class Tensor:
    __slots__ = ("data", "tape", "nid")

    def __init__(self, data: np.ndarray, tape: "Optional[Tape]" = None, nid: int = -1):
        self.data = data
        self.tape = tape
        self.nid = nid

    @property
    def shape(self):
        return self.data.shape

    @property
    def tracked(self) -> bool:
        return self.tape is not None

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, tracked={self.tracked})"


def constant(data) -> Tensor:
    arr = np.asarray(data, dtype=np.float64)
    return Tensor(_check_finite(arr))


class SparseRows:
    """Gradient touching only rows `ids` (possibly repeated) of a 2-d tensor."""

    __slots__ = ("shape", "ids", "rows")

    def __init__(self, shape, ids: np.ndarray, rows: np.ndarray):
        self.shape = shape
        self.ids = ids
        self.rows = rows

    def add_into(self, dense: np.ndarray) -> None:
        np.add.at(dense, self.ids, self.rows)

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.shape)
        self.add_into(out)
        return out


class SparseCols:
    """Gradient touching only distinct columns `cols` of a 2-d tensor."""

    __slots__ = ("shape", "cols", "block")

    def __init__(self, shape, cols: np.ndarray, block: np.ndarray):
        self.shape = shape
        self.cols = cols
        self.block = block

    def add_into(self, dense: np.ndarray) -> None:
        dense[:, self.cols] += self.block

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.shape)
        self.add_into(out)
        return out


def _gaccum(acc, g):
    """Combine two gradient contributions; densifies sparse carriers on conflict."""
    if acc is None:
        return g
    if isinstance(acc, (SparseRows, SparseCols)):
        acc = acc.to_dense()
    if isinstance(g, (SparseRows, SparseCols)):
        # pass-through pullbacks may alias acc to another node's gradient;
        # never mutate it in place
        acc = acc.copy()
        g.add_into(acc)
        return acc
    return acc + g


class Tape:
    """Append-only operation record; backward replays it in reverse."""

    __slots__ = ("_parents", "_pullbacks")

    def __init__(self):
        self._parents: list[tuple[int, ...]] = []
        self._pullbacks: list[Optional[Callable]] = []

    def __len__(self) -> int:
        return len(self._parents)

    def _append(self, parents: tuple[int, ...], pullback: Optional[Callable]) -> int:
        self._parents.append(parents)
        self._pullbacks.append(pullback)
        return len(self._parents) - 1

    def leaf(self, data: np.ndarray) -> Tensor:
        """Track an externally owned array (e.g. a model parameter)."""
        nid = self._append((), None)
        return Tensor(data, self, nid)

    def record(self, data: np.ndarray, parents: Sequence[Tensor], pullback: Callable) -> Tensor:
        """Register an op result. `pullback(gout)` must return one gradient
        (ndarray / SparseRows / SparseCols / None) per tracked parent."""
        nid = self._append(tuple(p.nid for p in parents), pullback)
        return Tensor(_check_finite(data), self, nid)


def _merge_tape(*tensors: Tensor) -> Optional[Tape]:
    tape = None
    for t in tensors:
        if t.tracked:
            if tape is None:
                tape = t.tape
            elif tape is not t.tape:
                raise ContractError("operands recorded on different tapes")
    return tape


def _result(tape, data, tracked_parents, pullback) -> Tensor:
    if tape is None:
        return Tensor(_check_finite(data))
    return tape.record(data, tracked_parents, pullback)


class Gradients:
    """Backward result: per-node gradients, queryable by leaf tensor."""

    def __init__(self, grads: list):
        self._grads = grads

    def get(self, t: Tensor) -> np.ndarray:
        g = self._grads[t.nid] if 0 <= t.nid < len(self._grads) else None
        if g is None:
            return np.zeros_like(t.data)
        if isinstance(g, (SparseRows, SparseCols)):
            return g.to_dense()
        return g

    def add_into(self, t: Tensor, buf: np.ndarray) -> None:
        g = self._grads[t.nid] if 0 <= t.nid < len(self._grads) else None
        if g is None:
            return
        if isinstance(g, (SparseRows, SparseCols)):
            g.add_into(buf)
        else:
            buf += g


def backward(loss: Tensor) -> Gradients:
    """Reverse-mode sweep from a scalar loss; unreached nodes keep None."""
    if not loss.tracked:
        raise ContractError("loss is not recorded on a tape")
    if loss.data.shape != ():
        raise ContractError(f"loss must be scalar, got shape {loss.data.shape}")
    tape = loss.tape
    grads: list = [None] * len(tape)
    grads[loss.nid] = np.float64(1.0)
    for nid in range(loss.nid, -1, -1):
        g = grads[nid]
        pullback = tape._pullbacks[nid]
        if g is None or pullback is None:
            continue
        if isinstance(g, (SparseRows, SparseCols)):
            g = grads[nid] = g.to_dense()
        for pid, pg in zip(tape._parents[nid], pullback(g)):
            if pg is not None:
                grads[pid] = _gaccum(grads[pid], pg)
    return Gradients(grads)


# ---------------------------------------------------------------------------
# operations


def add(a: Tensor, b: Tensor) -> Tensor:
    tape = _merge_tape(a, b)
    if a.shape == b.shape:
        data = a.data + b.data

        def pull(g):
            out = []
            if a.tracked:
                out.append(g)
            if b.tracked:
                out.append(g)
            return out

    elif a.data.ndim == 2 and b.data.ndim == 1 and a.shape[1] == b.shape[0]:
        # matrix + row vector broadcast over rows
        data = a.data + b.data

        def pull(g):
            out = []
            if a.tracked:
                out.append(g)
            if b.tracked:
                out.append(g.sum(axis=0))
            return out

    else:
        raise ShapeError(f"add: incompatible shapes {a.shape} and {b.shape}")
    if tape is None:
        return _result(None, data, (), None)
    return tape.record(data, [t for t in (a, b) if t.tracked], pull)


def sub(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise ShapeError(f"sub: incompatible shapes {a.shape} and {b.shape}")
    tape = _merge_tape(a, b)
    data = a.data - b.data
    if tape is None:
        return _result(None, data, (), None)
    parents = [t for t in (a, b) if t.tracked]

    def pull(g):
        out = []
        if a.tracked:
            out.append(g)
        if b.tracked:
            out.append(-g)
        return out

    return tape.record(data, parents, pull)


def mul(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise ShapeError(f"mul: incompatible shapes {a.shape} and {b.shape}")
    tape = _merge_tape(a, b)
    data = a.data * b.data
    if tape is None:
        return _result(None, data, (), None)
    parents = [t for t in (a, b) if t.tracked]

    def pull(g):
        out = []
        if a.tracked:
            out.append(g * b.data)
        if b.tracked:
            out.append(g * a.data)
        return out

    return tape.record(data, parents, pull)


def scale(a: Tensor, c: float) -> Tensor:
    tape = _merge_tape(a)
    data = a.data * c
    if tape is None:
        return _result(None, data, (), None)
    return tape.record(data, [a], lambda g: [g * c])


def matmul(a: Tensor, b: Tensor) -> Tensor:
    ad, bd = a.data, b.data
    if ad.ndim == 2 and bd.ndim == 2:
        if ad.shape[1] != bd.shape[0]:
            raise ShapeError(f"matmul: incompatible shapes {a.shape} and {b.shape}")
        data = ad @ bd

        def pull(g):
            out = []
            if a.tracked:
                out.append(g @ bd.T)
            if b.tracked:
                out.append(ad.T @ g)
            return out

    elif ad.ndim == 2 and bd.ndim == 1:
        if ad.shape[1] != bd.shape[0]:
            raise ShapeError(f"matmul: incompatible shapes {a.shape} and {b.shape}")
        data = ad @ bd

        def pull(g):
            out = []
            if a.tracked:
                out.append(g[:, None] * bd[None, :])
            if b.tracked:
                out.append(ad.T @ g)
            return out

    elif ad.ndim == 1 and bd.ndim == 2:
        if ad.shape[0] != bd.shape[0]:
            raise ShapeError(f"matmul: incompatible shapes {a.shape} and {b.shape}")
        data = ad @ bd

        def pull(g):
            out = []
            if a.tracked:
                out.append(bd @ g)
            if b.tracked:
                out.append(ad[:, None] * g[None, :])
            return out

    else:
        raise ShapeError(f"matmul: unsupported ranks {a.shape} @ {b.shape}")
    tape = _merge_tape(a, b)
    if tape is None:
        return _result(None, data, (), None)
    return tape.record(data, [t for t in (a, b) if t.tracked], pull)


def transpose(a: Tensor) -> Tensor:
    if a.data.ndim != 2:
        raise ShapeError(f"transpose: expected 2-d, got {a.shape}")
    tape = _merge_tape(a)
    data = a.data.T.copy()
    if tape is None:
        return _result(None, data, (), None)
    return tape.record(data, [a], lambda g: [g.T])


def concat(a: Tensor, b: Tensor) -> Tensor:
    """Concatenate along the last axis (vectors or matrices)."""
    ad, bd = a.data, b.data
    if ad.ndim != bd.ndim or ad.ndim not in (1, 2):
        raise ShapeError(f"concat: unsupported shapes {a.shape} and {b.shape}")
    if ad.ndim == 2 and ad.shape[0] != bd.shape[0]:
        raise ShapeError(f"concat: incompatible shapes {a.shape} and {b.shape}")
    axis = ad.ndim - 1
    split = ad.shape[axis]
    data = np.concatenate([ad, bd], axis=axis)
    tape = _merge_tape(a, b)
    if tape is None:
        return _result(None, data, (), None)

    def pull(g):
        ga, gb = (g[:split], g[split:]) if axis == 0 else (g[:, :split], g[:, split:])
        out = []
        if a.tracked:
            out.append(ga)
        if b.tracked:
            out.append(gb)
        return out

    return tape.record(data, [t for t in (a, b) if t.tracked], pull)


def tanh(a: Tensor) -> Tensor:
    tape = _merge_tape(a)
    data = np.tanh(a.data)
    if tape is None:
        return _result(None, data, (), None)
    return tape.record(data, [a], lambda g: [g * (1.0 - data * data)])


def sigmoid(a: Tensor) -> Tensor:
    x = a.data
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    tape = _merge_tape(a)
    if tape is None:
        return _result(None, out, (), None)
    return tape.record(out, [a], lambda g: [g * out * (1.0 - out)])


def softmax(a: Tensor) -> Tensor:
    """Softmax over a 1-d tensor, max-subtracted for stability."""
    x = a.data
    if x.ndim != 1:
        raise ShapeError(f"softmax: expected 1-d, got {a.shape}")
    e = np.exp(x - x.max())
    out = e / e.sum()
    tape = _merge_tape(a)
    if tape is None:
        return _result(None, out, (), None)
    return tape.record(out, [a], lambda g: [out * (g - np.dot(g, out))])


def sum_all(a: Tensor) -> Tensor:
    tape = _merge_tape(a)
    data = np.float64(a.data.sum())
    if tape is None:
        return _result(None, np.asarray(data), (), None)
    return tape.record(np.asarray(data), [a], lambda g: [np.full_like(a.data, g)])


def gather_rows(a: Tensor, ids: np.ndarray) -> Tensor:
    """Rows `ids` of a 2-d tensor; backward scatter-adds (SparseRows)."""
    if a.data.ndim != 2:
        raise ShapeError(f"gather_rows: expected 2-d, got {a.shape}")
    ids = np.asarray(ids, dtype=np.int64)
    data = a.data[ids]
    tape = _merge_tape(a)
    if tape is None:
        return _result(None, data, (), None)
    shape = a.data.shape
    return tape.record(data, [a], lambda g: [SparseRows(shape, ids, g)])


def reverse_rows(a: Tensor) -> Tensor:
    if a.data.ndim != 2:
        raise ShapeError(f"reverse_rows: expected 2-d, got {a.shape}")
    tape = _merge_tape(a)
    data = a.data[::-1].copy()
    if tape is None:
        return _result(None, data, (), None)
    return tape.record(data, [a], lambda g: [g[::-1]])


def dropout(a: Tensor, p: float, rng: Rng, training: bool) -> Tensor:
    """Inverted dropout. Identity (consuming no draws) when p == 0 or not
    training; otherwise one uniform draw per entry, survivors scaled 1/(1-p)."""
    if not 0.0 <= p < 1.0:
        raise ContractError(f"dropout rate must be in [0, 1), got {p}")
    if not training or p == 0.0:
        return a
    keep = (rng.uniform(a.data.shape) >= p).astype(np.float64)
    keep /= 1.0 - p
    data = a.data * keep
    tape = _merge_tape(a)
    if tape is None:
        return _result(None, data, (), None)
    return tape.record(data, [a], lambda g: [g * keep])


def softmax_cross_entropy(logits: Tensor, label: int) -> tuple[Tensor, np.ndarray]:
    """Scalar loss -ln p[label] plus the probability vector.

    Gradient w.r.t. logits is probs - onehot(label).
    """
    x = logits.data
    if x.ndim != 1 or x.shape[0] < 2:
        raise ContractError(f"logits must be 1-d with >= 2 classes, got {logits.shape}")
    if not 0 <= label < x.shape[0]:
        raise IndexError(f"label {label} out of range for {x.shape[0]} classes")
    m = x.max()
    shifted = x - m
    e = np.exp(shifted)
    z = e.sum()
    probs = e / z
    loss = np.asarray(np.log(z) - shifted[label])
    tape = _merge_tape(logits)
    if tape is None:
        return _result(None, loss, (), None), probs

    def pull(g):
        d = probs.copy()
        d[label] -= 1.0
        return [g * d]

    return tape.record(loss, [logits], pull), probs
