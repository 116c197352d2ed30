"""Reverse-mode autodiff over dense float64 numpy arrays.

Every op records itself on a single module-level tape. backward() replays
the tape once in reverse, accumulating into .grad, then clears the tape.
Tensors are 0-d scalars, 1-d vectors, or 2-d matrices; nothing higher.
"""
from __future__ import annotations

from contextlib import contextmanager
from typing import Sequence

import numpy as np

_TAPE: list = []
_GRAD_ENABLED = True


class Tensor:
    __slots__ = ("values", "grad", "requires_grad")

    def __init__(self, values, requires_grad: bool = False):
        self.values = np.asarray(values, dtype=np.float64)
        if self.values.ndim > 2:
            raise ValueError(f"tensors are at most 2-d, got shape {self.values.shape}")
        self.grad = None
        self.requires_grad = bool(requires_grad)

    @property
    def shape(self):
        return self.values.shape

    @property
    def ndim(self):
        return self.values.ndim

    def item(self) -> float:
        return float(self.values)

    def __repr__(self):
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"


def constant(values) -> Tensor:
    return Tensor(values, requires_grad=False)


@contextmanager
def no_grad():
    """Disable taping inside the block; ops run forward-only."""
    global _GRAD_ENABLED
    prev = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = prev


def reset_tape():
    _TAPE.clear()


def tape_size() -> int:
    return len(_TAPE)


def _record(out: Tensor, inputs: Sequence[Tensor], bwd) -> Tensor:
    if _GRAD_ENABLED and any(t.requires_grad for t in inputs):
        out.requires_grad = True
        _TAPE.append((out, bwd))
    return out


def _accum(t: Tensor, g):
    if not t.requires_grad:
        return
    if t.grad is None:
        t.grad = np.zeros_like(t.values)
    t.grad += g


def backward(loss: Tensor):
    """Seed d(loss)/d(loss)=1, replay the tape in reverse, clear the tape.

    Tensors not reachable from loss keep grad=None.
    """
    if loss.values.ndim != 0:
        raise ValueError(f"backward needs a scalar loss, got shape {loss.values.shape}")
    try:
        if loss.requires_grad:
            if loss.grad is None:
                loss.grad = np.zeros(())
            loss.grad += 1.0
            for out, bwd in reversed(_TAPE):
                if out.grad is not None:
                    bwd(out.grad)
    finally:
        _TAPE.clear()


# ---------------------------------------------------------------- linear ops

def matmul(a: Tensor, b: Tensor) -> Tensor:
    av, bv = a.values, b.values
    if av.ndim == 2 and bv.ndim == 2:
        if av.shape[1] != bv.shape[0]:
            raise ValueError(f"matmul shape mismatch: {av.shape} @ {bv.shape}")
        out = Tensor(av @ bv)

        def bwd(g):
            _accum(a, g @ bv.T)
            _accum(b, av.T @ g)
    elif av.ndim == 2 and bv.ndim == 1:
        if av.shape[1] != bv.shape[0]:
            raise ValueError(f"matmul shape mismatch: {av.shape} @ {bv.shape}")
        out = Tensor(av @ bv)

        def bwd(g):
            _accum(a, np.outer(g, bv))
            _accum(b, av.T @ g)
    elif av.ndim == 1 and bv.ndim == 2:
        if av.shape[0] != bv.shape[0]:
            raise ValueError(f"matmul shape mismatch: {av.shape} @ {bv.shape}")
        out = Tensor(av @ bv)

        def bwd(g):
            _accum(a, bv @ g)
            _accum(b, np.outer(av, g))
    else:
        raise ValueError(f"matmul needs matrix/vector operands, got {av.shape} @ {bv.shape}")
    return _record(out, (a, b), bwd)


def add(a: Tensor, b: Tensor) -> Tensor:
    av, bv = a.values, b.values
    if av.shape == bv.shape:
        out = Tensor(av + bv)

        def bwd(g):
            _accum(a, g)
            _accum(b, g)
    elif av.ndim == 2 and bv.ndim == 1 and av.shape[1] == bv.shape[0]:
        out = Tensor(av + bv)

        def bwd(g):
            _accum(a, g)
            _accum(b, g.sum(axis=0))
    elif av.ndim == 1 and bv.ndim == 2 and bv.shape[1] == av.shape[0]:
        out = Tensor(av + bv)

        def bwd(g):
            _accum(a, g.sum(axis=0))
            _accum(b, g)
    else:
        raise ValueError(f"add shape mismatch: {av.shape} + {bv.shape}")
    return _record(out, (a, b), bwd)


def scale(a: Tensor, c: float) -> Tensor:
    c = float(c)
    out = Tensor(a.values * c)

    def bwd(g):
        _accum(a, g * c)
    return _record(out, (a,), bwd)


def sub(a: Tensor, b: Tensor) -> Tensor:
    return add(a, scale(b, -1.0))


def mul(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise product; shapes must match exactly."""
    av, bv = a.values, b.values
    if av.shape != bv.shape:
        raise ValueError(f"mul shape mismatch: {av.shape} * {bv.shape}")
    out = Tensor(av * bv)

    def bwd(g):
        _accum(a, g * bv)
        _accum(b, g * av)
    return _record(out, (a, b), bwd)


def dot(a: Tensor, b: Tensor) -> Tensor:
    av, bv = a.values, b.values
    if av.ndim != 1 or bv.ndim != 1 or av.shape != bv.shape:
        raise ValueError(f"dot needs equal-length vectors, got {av.shape} . {bv.shape}")
    out = Tensor(av @ bv)

    def bwd(g):
        _accum(a, g * bv)
        _accum(b, g * av)
    return _record(out, (a, b), bwd)


# ------------------------------------------------------------ nonlinearities

def tanh(x: Tensor) -> Tensor:
    y = np.tanh(x.values)
    out = Tensor(y)

    def bwd(g):
        _accum(x, g * (1.0 - y * y))
    return _record(out, (x,), bwd)


def sigmoid(x: Tensor) -> Tensor:
    v = x.values
    y = np.empty_like(v)
    pos = v >= 0
    y[pos] = 1.0 / (1.0 + np.exp(-v[pos]))
    ev = np.exp(v[~pos])
    y[~pos] = ev / (1.0 + ev)
    out = Tensor(y)

    def bwd(g):
        _accum(x, g * y * (1.0 - y))
    return _record(out, (x,), bwd)


def relu(x: Tensor) -> Tensor:
    mask = x.values > 0
    out = Tensor(np.where(mask, x.values, 0.0))

    def bwd(g):
        _accum(x, g * mask)
    return _record(out, (x,), bwd)


def softmax(x: Tensor) -> Tensor:
    """Softmax over the last axis: whole vector, or each matrix row."""
    v = x.values
    if v.size == 0:
        raise ValueError(f"softmax on empty input, shape {v.shape}")
    if v.ndim not in (1, 2):
        raise ValueError(f"softmax needs a vector or matrix, got shape {v.shape}")
    shifted = v - v.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    s = e / e.sum(axis=-1, keepdims=True)
    out = Tensor(s)

    def bwd(g):
        _accum(x, s * (g - (g * s).sum(axis=-1, keepdims=True)))
    return _record(out, (x,), bwd)


def logsumexp(v: Tensor) -> Tensor:
    """log sum exp of a vector, reduced to a scalar. Stable under shift."""
    x = v.values
    if x.ndim != 1 or x.size == 0:
        raise ValueError(f"logsumexp needs a non-empty vector, got shape {x.shape}")
    m = x.max()
    out = Tensor(m + np.log(np.sum(np.exp(x - m))))
    e = np.exp(x - out.values)  # softmax(x)

    def bwd(g):
        _accum(v, g * e)
    return _record(out, (v,), bwd)


def logsumexp_rows(m: Tensor) -> Tensor:
    """Per-row log sum exp of a matrix, one scalar per row."""
    x = m.values
    if x.ndim != 2 or x.shape[1] == 0:
        raise ValueError(f"logsumexp_rows needs a matrix with columns, got shape {x.shape}")
    mx = x.max(axis=1, keepdims=True)
    out = Tensor((mx + np.log(np.sum(np.exp(x - mx), axis=1, keepdims=True)))[:, 0])
    sm = np.exp(x - out.values[:, None])

    def bwd(g):
        _accum(m, g[:, None] * sm)
    return _record(out, (m,), bwd)


def normalize(v: Tensor) -> Tensor:
    """v / ||v||_2. Norm <= 1e-9 yields the zero vector with zero gradient."""
    x = v.values
    if x.ndim != 1:
        raise ValueError(f"normalize needs a vector, got shape {x.shape}")
    n = float(np.linalg.norm(x))
    if n <= 1e-9:
        out = Tensor(np.zeros_like(x))

        def bwd(g):
            pass
    else:
        u = x / n
        out = Tensor(u)

        def bwd(g):
            _accum(v, (g - u * (u @ g)) / n)
    return _record(out, (v,), bwd)


# ----------------------------------------------------------- shape plumbing

def concat(parts: Sequence[Tensor], axis: int = 0) -> Tensor:
    """Join tensors. Scalars are treated as length-1 vectors for axis 0."""
    if not parts:
        raise ValueError("concat of an empty list")
    ndims = {p.values.ndim for p in parts}
    if ndims <= {0, 1}:
        if axis != 0:
            raise ValueError(f"concat of vectors needs axis 0, got {axis}")
        arrs = [np.atleast_1d(p.values) for p in parts]
        out = Tensor(np.concatenate(arrs))
        sizes = [a.shape[0] for a in arrs]

        def bwd(g):
            off = 0
            for p, n in zip(parts, sizes):
                seg = g[off:off + n]
                _accum(p, seg.reshape(()) if p.values.ndim == 0 else seg)
                off += n
    elif ndims == {2}:
        if axis not in (0, 1):
            raise ValueError(f"concat axis must be 0 or 1, got {axis}")
        arrs = [p.values for p in parts]
        widths = {a.shape[1 - axis] for a in arrs}
        if len(widths) != 1:
            raise ValueError(f"concat shape mismatch along axis {axis}: "
                             f"{[a.shape for a in arrs]}")
        out = Tensor(np.concatenate(arrs, axis=axis))
        sizes = [a.shape[axis] for a in arrs]

        def bwd(g):
            off = 0
            for p, n in zip(parts, sizes):
                sl = (slice(off, off + n), slice(None)) if axis == 0 \
                    else (slice(None), slice(off, off + n))
                _accum(p, g[sl])
                off += n
    else:
        raise ValueError(f"concat of mixed ranks: {[p.values.shape for p in parts]}")
    return _record(out, tuple(parts), bwd)


def stack_rows(rows: Sequence[Tensor]) -> Tensor:
    """Stack equal-length vectors into a matrix, one per row."""
    if not rows:
        raise ValueError("stack_rows of an empty list")
    lens = {r.values.shape for r in rows}
    if any(r.values.ndim != 1 for r in rows) or len(lens) != 1:
        raise ValueError(f"stack_rows needs equal-length vectors, got {[r.values.shape for r in rows]}")
    out = Tensor(np.stack([r.values for r in rows]))

    def bwd(g):
        for i, r in enumerate(rows):
            _accum(r, g[i])
    return _record(out, tuple(rows), bwd)


def transpose(m: Tensor) -> Tensor:
    if m.values.ndim != 2:
        raise ValueError(f"transpose needs a matrix, got shape {m.values.shape}")
    out = Tensor(m.values.T)

    def bwd(g):
        _accum(m, g.T)
    return _record(out, (m,), bwd)


def get_row(m: Tensor, i: int) -> Tensor:
    if m.values.ndim != 2:
        raise ValueError(f"get_row needs a matrix, got shape {m.values.shape}")
    if not 0 <= i < m.values.shape[0]:
        raise IndexError(f"row {i} out of range for shape {m.values.shape}")
    out = Tensor(m.values[i])

    def bwd(g):
        if m.requires_grad:
            if m.grad is None:
                m.grad = np.zeros_like(m.values)
            m.grad[i] += g
    return _record(out, (m,), bwd)


def get_col(m: Tensor, j: int) -> Tensor:
    if m.values.ndim != 2:
        raise ValueError(f"get_col needs a matrix, got shape {m.values.shape}")
    if not 0 <= j < m.values.shape[1]:
        raise IndexError(f"column {j} out of range for shape {m.values.shape}")
    out = Tensor(m.values[:, j])

    def bwd(g):
        if m.requires_grad:
            if m.grad is None:
                m.grad = np.zeros_like(m.values)
            m.grad[:, j] += g
    return _record(out, (m,), bwd)


def get_item(v: Tensor, i: int) -> Tensor:
    if v.values.ndim != 1:
        raise ValueError(f"get_item needs a vector, got shape {v.values.shape}")
    if not 0 <= i < v.values.shape[0]:
        raise IndexError(f"index {i} out of range for shape {v.values.shape}")
    out = Tensor(v.values[i])

    def bwd(g):
        if v.requires_grad:
            if v.grad is None:
                v.grad = np.zeros_like(v.values)
            v.grad[i] += g
    return _record(out, (v,), bwd)


def get_elem(m: Tensor, i: int, j: int) -> Tensor:
    if m.values.ndim != 2:
        raise ValueError(f"get_elem needs a matrix, got shape {m.values.shape}")
    rows, cols = m.values.shape
    if not (0 <= i < rows and 0 <= j < cols):
        raise IndexError(f"element ({i}, {j}) out of range for shape {m.values.shape}")
    out = Tensor(m.values[i, j])

    def bwd(g):
        if m.requires_grad:
            if m.grad is None:
                m.grad = np.zeros_like(m.values)
            m.grad[i, j] += g
    return _record(out, (m,), bwd)


def slice_vec(v: Tensor, start: int, stop: int) -> Tensor:
    if v.values.ndim != 1:
        raise ValueError(f"slice_vec needs a vector, got shape {v.values.shape}")
    if not 0 <= start <= stop <= v.values.shape[0]:
        raise IndexError(f"slice [{start}:{stop}] out of range for shape {v.values.shape}")
    out = Tensor(v.values[start:stop])

    def bwd(g):
        if v.requires_grad:
            if v.grad is None:
                v.grad = np.zeros_like(v.values)
            v.grad[start:stop] += g
    return _record(out, (v,), bwd)


def submat(m: Tensor, r0: int, r1: int, c0: int, c1: int) -> Tensor:
    if m.values.ndim != 2:
        raise ValueError(f"submat needs a matrix, got shape {m.values.shape}")
    rows, cols = m.values.shape
    if not (0 <= r0 <= r1 <= rows and 0 <= c0 <= c1 <= cols):
        raise IndexError(f"submat [{r0}:{r1}, {c0}:{c1}] out of range for shape {m.values.shape}")
    out = Tensor(m.values[r0:r1, c0:c1])

    def bwd(g):
        if m.requires_grad:
            if m.grad is None:
                m.grad = np.zeros_like(m.values)
            m.grad[r0:r1, c0:c1] += g
    return _record(out, (m,), bwd)


def mean_rows(m: Tensor) -> Tensor:
    """Column means of a matrix: the average over rows."""
    if m.values.ndim != 2 or m.values.shape[0] == 0:
        raise ValueError(f"mean_rows needs a matrix with rows, got shape {m.values.shape}")
    t = m.values.shape[0]
    out = Tensor(m.values.mean(axis=0))

    def bwd(g):
        _accum(m, np.broadcast_to(g / t, m.values.shape))
    return _record(out, (m,), bwd)


def tsum(x: Tensor) -> Tensor:
    """Sum of all entries, reduced to a scalar."""
    out = Tensor(x.values.sum())

    def bwd(g):
        _accum(x, np.broadcast_to(g, x.values.shape))
    return _record(out, (x,), bwd)
