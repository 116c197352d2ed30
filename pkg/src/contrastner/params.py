"""Named parameter store, gradient-descent step, binary checkpoints.

Checkpoint layout: magic b"WCLB", version uint32, then one record per
parameter in store order: name length uint32, utf-8 name, rank uint32,
each dimension uint32, values as row-major little-endian float64.
"""
from __future__ import annotations

import struct
from typing import Iterable, Iterator, Tuple

import numpy as np

from .autodiff import Tensor

MAGIC = b"WCLB"
VERSION = 1


class ParamStore:
    """Insertion-ordered mapping of names to trainable tensors."""

    def __init__(self):
        self._params: dict[str, Tensor] = {}

    def add(self, name: str, values) -> Tensor:
        if name in self._params:
            raise ValueError(f"duplicate parameter name: {name}")
        t = Tensor(values, requires_grad=True)
        self._params[name] = t
        return t

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __len__(self) -> int:
        return len(self._params)

    def names(self) -> list:
        return list(self._params)

    def items(self) -> Iterator[Tuple[str, Tensor]]:
        return iter(self._params.items())

    def tensors(self) -> list:
        return list(self._params.values())

    def subset(self, prefix: str) -> "ParamStore":
        """New store sharing the tensors whose names start with prefix."""
        out = ParamStore()
        for name, t in self._params.items():
            if name.startswith(prefix):
                out._params[name] = t
        return out

    def copy(self, requires_grad: bool = True) -> "ParamStore":
        """Deep value copy; grads are not copied."""
        out = ParamStore()
        for name, t in self._params.items():
            c = Tensor(t.values.copy(), requires_grad=requires_grad)
            out._params[name] = c
        return out

    def adopt(self, other: "ParamStore"):
        """Take over every tensor of another store (names must be fresh)."""
        for name, t in other.items():
            if name in self._params:
                raise ValueError(f"duplicate parameter name: {name}")
            self._params[name] = t

    def zero_grads(self):
        for t in self._params.values():
            t.grad = None


def sgd_step(stores, lr: float):
    """One descent step p -= lr * grad over every parameter with a grad.

    Rejects the whole step if any present gradient is non-finite, naming
    the parameter. All grads are cleared afterwards.
    """
    if isinstance(stores, ParamStore):
        stores = [stores]
    lr = float(lr)
    if lr < 0:
        raise ValueError(f"learning rate must be >= 0, got {lr}")
    for store in stores:
        for name, t in store.items():
            if t.grad is not None and not np.all(np.isfinite(t.grad)):
                raise ValueError(f"non-finite gradient in parameter {name}")
    for store in stores:
        for _, t in store.items():
            if t.grad is not None:
                t.values -= lr * t.grad
                t.grad = None


def save_params(store: ParamStore, path):
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", VERSION))
        for name, t in store.items():
            raw = name.encode("utf-8")
            f.write(struct.pack("<I", len(raw)))
            f.write(raw)
            f.write(struct.pack("<I", t.values.ndim))
            for d in t.values.shape:
                f.write(struct.pack("<I", d))
            f.write(np.ascontiguousarray(t.values, dtype="<f8").tobytes())


def load_params(path) -> ParamStore:
    store = ParamStore()
    with open(path, "rb") as f:
        magic = f.read(4)
        if magic != MAGIC:
            raise ValueError(f"bad checkpoint magic {magic!r} in {path}")
        (version,) = struct.unpack("<I", f.read(4))
        if version != VERSION:
            raise ValueError(f"unsupported checkpoint version {version} in {path}")
        while True:
            head = f.read(4)
            if not head:
                break
            if len(head) != 4:
                raise ValueError(f"truncated checkpoint {path}")
            (nlen,) = struct.unpack("<I", head)
            name = f.read(nlen).decode("utf-8")
            (ndim,) = struct.unpack("<I", f.read(4))
            shape = tuple(struct.unpack("<I", f.read(4))[0] for _ in range(ndim))
            count = 1
            for d in shape:
                count *= d
            buf = f.read(8 * count)
            if len(buf) != 8 * count:
                raise ValueError(f"truncated checkpoint {path} at parameter {name}")
            values = np.frombuffer(buf, dtype="<f8").reshape(shape).copy()
            store.add(name, values)
    return store
