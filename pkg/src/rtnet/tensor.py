"""Reverse-mode automatic differentiation over numpy arrays.

A small tape: each op produces a :class:`Tensor` holding the result array,
its parent tensors, and a closure that routes the output gradient back into
the parents. Only the operations the timing models actually need are here
(affine maps, LSTM gate math, gathers for embeddings and acoustic-state
selection, masked reductions). Training runs in float32; gradient checks
build float64 graphs. Gradients of broadcast operands are summed back to
the operand's shape. There is no graph compiler — just these blocks.
"""
from __future__ import annotations

import contextlib
from typing import Sequence

import numpy as np

_GRAD_STACK = [True]


@contextlib.contextmanager
def no_grad():
    """Forward-only evaluation: ops inside the block record no tape."""
    _GRAD_STACK.append(False)
    try:
        yield
    finally:
        _GRAD_STACK.pop()


def grad_enabled() -> bool:
    return _GRAD_STACK[-1]


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum gradient g down to `shape` (inverse of numpy broadcasting)."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


class Tensor:
    __slots__ = ("data", "grad", "_parents", "_bwd", "_track")

    def __init__(self, data, track: bool = False):
        self.data = data if isinstance(data, np.ndarray) else np.asarray(data)
        self.grad: np.ndarray | None = None
        self._parents: tuple = ()
        self._bwd = None
        self._track = track

    @staticmethod
    def _make(data: np.ndarray, parents: tuple, bwd) -> "Tensor":
        out = Tensor(data)
        if grad_enabled() and any(p._track for p in parents):
            out._parents = parents
            out._bwd = bwd
            out._track = True
        return out

    def _acc(self, g: np.ndarray) -> None:
        if not self._track:
            return
        if self.grad is None:
            # copy: g may be a view into another node's gradient buffer
            self.grad = np.array(g, dtype=self.data.dtype)
        else:
            self.grad += g

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def item(self) -> float:
        return float(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype}, track={self._track})"

    # -- arithmetic --

    def __add__(self, other):
        if isinstance(other, Tensor):
            a, b = self, other

            def bwd(g):
                a._acc(_unbroadcast(g, a.data.shape))
                b._acc(_unbroadcast(g, b.data.shape))

            return Tensor._make(a.data + b.data, (a, b), bwd)

        def bwd_s(g):
            self._acc(_unbroadcast(g, self.data.shape))

        return Tensor._make(self.data + other, (self,), bwd_s)

    def __radd__(self, other):
        return self.__add__(other)

    def __sub__(self, other):
        if isinstance(other, Tensor):
            a, b = self, other

            def bwd(g):
                a._acc(_unbroadcast(g, a.data.shape))
                b._acc(_unbroadcast(-g, b.data.shape))

            return Tensor._make(a.data - b.data, (a, b), bwd)

        def bwd_s(g):
            self._acc(_unbroadcast(g, self.data.shape))

        return Tensor._make(self.data - other, (self,), bwd_s)

    def __rsub__(self, other):
        def bwd(g):
            self._acc(_unbroadcast(-g, self.data.shape))

        return Tensor._make(other - self.data, (self,), bwd)

    def __neg__(self):
        def bwd(g):
            self._acc(-g)

        return Tensor._make(-self.data, (self,), bwd)

    def __mul__(self, other):
        if isinstance(other, Tensor):
            a, b = self, other

            def bwd(g):
                a._acc(_unbroadcast(g * b.data, a.data.shape))
                b._acc(_unbroadcast(g * a.data, b.data.shape))

            return Tensor._make(a.data * b.data, (a, b), bwd)

        def bwd_s(g):
            self._acc(_unbroadcast(g * other, self.data.shape))

        return Tensor._make(self.data * other, (self,), bwd_s)

    def __rmul__(self, other):
        return self.__mul__(other)

    def __matmul__(self, other: "Tensor") -> "Tensor":
        a, b = self, other
        if a.data.ndim != 2 or b.data.ndim != 2:
            raise ValueError(f"matmul expects 2-D operands, got {a.data.shape} @ {b.data.shape}")

        def bwd(g):
            a._acc(g @ b.data.T)
            b._acc(a.data.T @ g)

        return Tensor._make(a.data @ b.data, (a, b), bwd)

    # -- nonlinearities --

    def sigmoid(self) -> "Tensor":
        x = self.data
        y = np.empty_like(x)
        pos = x >= 0
        y[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
        ex = np.exp(x[~pos])
        y[~pos] = ex / (1.0 + ex)

        def bwd(g):
            self._acc(g * (y * (1.0 - y)))

        return Tensor._make(y, (self,), bwd)

    def tanh(self) -> "Tensor":
        y = np.tanh(self.data)

        def bwd(g):
            self._acc(g * (1.0 - y * y))

        return Tensor._make(y, (self,), bwd)

    def relu(self) -> "Tensor":
        def bwd(g):
            self._acc(g * (self.data > 0))

        return Tensor._make(np.maximum(self.data, 0.0), (self,), bwd)

    def exp(self) -> "Tensor":
        y = np.exp(self.data)

        def bwd(g):
            self._acc(g * y)

        return Tensor._make(y, (self,), bwd)

    def log(self) -> "Tensor":
        def bwd(g):
            self._acc(g / self.data)

        return Tensor._make(np.log(self.data), (self,), bwd)

    def clip(self, lo: float, hi: float) -> "Tensor":
        def bwd(g):
            self._acc(g * ((self.data > lo) & (self.data < hi)))

        return Tensor._make(np.clip(self.data, lo, hi), (self,), bwd)

    # -- shape ops --

    def reshape(self, *shape) -> "Tensor":
        old = self.data.shape

        def bwd(g):
            self._acc(g.reshape(old))

        return Tensor._make(self.data.reshape(*shape), (self,), bwd)

    def sum(self, axis=None, keepdims: bool = False) -> "Tensor":
        shape = self.data.shape

        def bwd(g):
            if axis is None:
                self._acc(np.full(shape, g, dtype=self.data.dtype))
            else:
                gg = g if keepdims else np.expand_dims(g, axis)
                self._acc(np.broadcast_to(gg, shape).astype(self.data.dtype, copy=True))

        return Tensor._make(self.data.sum(axis=axis, keepdims=keepdims), (self,), bwd)

    # -- backward --

    def backward(self, seed: np.ndarray | None = None) -> None:
        """Backpropagate from this tensor (default seed gradient: ones)."""
        topo: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                topo.append(node)
                continue
            if id(node) in seen or not node._track:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if p._track and id(p) not in seen:
                    stack.append((p, False))
        if seed is None:
            seed = np.ones_like(self.data)
        self.grad = np.asarray(seed, dtype=self.data.dtype)
        for node in reversed(topo):
            if node._bwd is not None and node.grad is not None:
                node._bwd(node.grad)


class Parameter(Tensor):
    """Trainable leaf: named, tracked, with a persistent gradient buffer."""

    __slots__ = ("name",)

    def __init__(self, data: np.ndarray, name: str):
        super().__init__(np.ascontiguousarray(data), track=True)
        self.name = name
        self.grad = np.zeros_like(self.data)

    def _acc(self, g: np.ndarray) -> None:
        self.grad += g

    def zero_grad(self) -> None:
        self.grad[...] = 0.0

    def __repr__(self):
        return f"Parameter({self.name}, shape={self.data.shape})"


# -- free functions --


def constant(data, dtype=None) -> Tensor:
    return Tensor(np.asarray(data, dtype=dtype))


def concat(parts: Sequence[Tensor], axis: int = -1) -> Tensor:
    datas = [p.data for p in parts]
    sizes = [d.shape[axis] for d in datas]
    offsets = np.cumsum([0] + sizes)
    ndim = datas[0].ndim
    ax = axis if axis >= 0 else ndim + axis

    def bwd(g):
        for p, lo, hi in zip(parts, offsets[:-1], offsets[1:]):
            idx = [slice(None)] * ndim
            idx[ax] = slice(lo, hi)
            p._acc(g[tuple(idx)])

    return Tensor._make(np.concatenate(datas, axis=axis), tuple(parts), bwd)


def stack(parts: Sequence[Tensor], axis: int = 1) -> Tensor:
    def bwd(g):
        for i, p in enumerate(parts):
            p._acc(np.take(g, i, axis=axis))

    return Tensor._make(np.stack([p.data for p in parts], axis=axis), tuple(parts), bwd)


def slice_cols(t: Tensor, start: int, stop: int) -> Tensor:
    """t[..., start:stop] along the last axis."""
    shape = t.data.shape

    def bwd(g):
        gg = np.zeros(shape, dtype=g.dtype)
        gg[..., start:stop] = g
        t._acc(gg)

    return Tensor._make(t.data[..., start:stop], (t,), bwd)


def tile_time(t: Tensor, T: int) -> Tensor:
    """Repeat a (B, D) tensor along a new time axis: -> (B, T, D)."""
    B, D = t.data.shape

    def bwd(g):
        t._acc(g.sum(axis=1))

    return Tensor._make(
        np.broadcast_to(t.data[:, None, :], (B, T, D)).copy(), (t,), bwd
    )


def gather_rows(table: Tensor, ids: np.ndarray) -> Tensor:
    """Embedding lookup: table (V, D), integer ids of any shape -> (*ids.shape, D)."""
    ids = np.asarray(ids)

    def bwd(g):
        gt = np.zeros_like(table.data)
        np.add.at(gt, ids.reshape(-1), g.reshape(-1, g.shape[-1]))
        table._acc(gt)

    return Tensor._make(table.data[ids], (table,), bwd)


def gather_frames(x: Tensor, idx: np.ndarray) -> Tensor:
    """Per-row time gather: x (B, T, D), idx (B, I) -> (B, I, D)."""
    idx = np.asarray(idx)
    b_ix = np.arange(x.data.shape[0])[:, None]

    def bwd(g):
        gx = np.zeros_like(x.data)
        np.add.at(gx, (b_ix, idx), g)
        x._acc(gx)

    return Tensor._make(x.data[b_ix, idx], (x,), bwd)
