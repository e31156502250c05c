"""Neural building blocks: affine maps, embeddings, LSTM cells and runners.

Everything is built from :mod:`rtnet.tensor` ops. LSTM weights use a single
combined matrix of shape ``(D_in + H, 4H)`` with gate order (input, forget,
cell, output) and the forget-gate bias initialised to +1 so early training
keeps memory open. Sequence runners operate on padded batches ``(B, T, D)``
with an optional validity mask; masked steps carry the previous state
through unchanged, which keeps reverse-direction passes correct on ragged
batches.
"""
from __future__ import annotations

import numpy as np

from .rng import RngStream
from .tensor import Parameter, Tensor, concat, slice_cols, stack


class Module:
    """Base class; collects parameters from attributes, in definition order."""

    def parameters(self) -> list[Parameter]:
        out: list[Parameter] = []
        for v in self.__dict__.values():
            if isinstance(v, Parameter):
                out.append(v)
            elif isinstance(v, Module):
                out.extend(v.parameters())
            elif isinstance(v, (list, tuple)):
                for item in v:
                    if isinstance(item, Module):
                        out.extend(item.parameters())
        return out

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.zero_grad()


def _uniform_init(rng: RngStream, shape: tuple, fan_in: int, dtype) -> np.ndarray:
    k = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-k, k, size=shape).astype(dtype)


class Affine(Module):
    """y = x @ W + b, accepting (B, D_in) or (B, T, D_in) inputs."""

    def __init__(self, d_in: int, d_out: int, rng: RngStream, name: str, dtype=np.float32):
        self.W = Parameter(_uniform_init(rng, (d_in, d_out), d_in, dtype), f"{name}.W")
        self.b = Parameter(np.zeros(d_out, dtype=dtype), f"{name}.b")
        self.d_in = d_in
        self.d_out = d_out

    def __call__(self, x: Tensor) -> Tensor:
        if x.data.ndim == 2:
            return x @ self.W + self.b
        if x.data.ndim == 3:
            B, T, D = x.data.shape
            y = x.reshape(B * T, D) @ self.W + self.b
            return y.reshape(B, T, self.d_out)
        raise ValueError(f"Affine expects 2-D or 3-D input, got shape {x.data.shape}")


def affine_activation(x: Tensor, W: Tensor, b: Tensor, kind: str = "none") -> Tensor:
    """Elementwise activation of x @ W + b; kind in {relu, sigmoid, none}."""
    y = x @ W + b
    if kind == "relu":
        return y.relu()
    if kind == "sigmoid":
        return y.sigmoid()
    if kind == "none":
        return y
    raise ValueError(f"unknown activation kind: {kind!r}")


class Embedding(Module):
    """Token id -> dense vector lookup table, init U(-0.05, 0.05)."""

    def __init__(self, n_tokens: int, dim: int, rng: RngStream, name: str, dtype=np.float32):
        table = rng.uniform(-0.05, 0.05, size=(n_tokens, dim)).astype(dtype)
        self.table = Parameter(table, f"{name}.table")
        self.n_tokens = n_tokens
        self.dim = dim

    def __call__(self, ids: np.ndarray) -> Tensor:
        from .tensor import gather_rows

        return gather_rows(self.table, ids)


class LSTMCell(Module):
    def __init__(self, d_in: int, hidden: int, rng: RngStream, name: str, dtype=np.float32):
        W = _uniform_init(rng, (d_in + hidden, 4 * hidden), d_in + hidden, dtype)
        b = np.zeros(4 * hidden, dtype=dtype)
        b[hidden : 2 * hidden] = 1.0  # forget gate bias
        self.W = Parameter(W, f"{name}.W")
        self.b = Parameter(b, f"{name}.b")
        self.d_in = d_in
        self.hidden = hidden

    def step(self, x: Tensor, h: Tensor, c: Tensor) -> tuple[Tensor, Tensor]:
        H = self.hidden
        z = concat([x, h], axis=-1) @ self.W + self.b
        i = slice_cols(z, 0, H).sigmoid()
        f = slice_cols(z, H, 2 * H).sigmoid()
        g = slice_cols(z, 2 * H, 3 * H).tanh()
        o = slice_cols(z, 3 * H, 4 * H).sigmoid()
        c_new = f * c + i * g
        h_new = o * c_new.tanh()
        return h_new, c_new


def run_lstm(
    cell: LSTMCell,
    xs: Tensor,
    mask: np.ndarray | None = None,
    reverse: bool = False,
) -> Tensor:
    """Run an LSTM over a padded batch.

    xs: (B, T, D_in); mask: (B, T) with 1 on valid frames, or None.
    Returns hidden states (B, T, H). On masked frames the state freezes,
    so a reversed pass entering the valid region carries the zero state
    rather than garbage from the padding.
    """
    B, T, _ = xs.data.shape
    H = cell.hidden
    dtype = xs.data.dtype
    h = Tensor(np.zeros((B, H), dtype=dtype))
    c = Tensor(np.zeros((B, H), dtype=dtype))
    outs: list[Tensor | None] = [None] * T
    order = range(T - 1, -1, -1) if reverse else range(T)
    for t in order:
        xt = _frame(xs, t)
        h_new, c_new = cell.step(xt, h, c)
        if mask is not None:
            m = Tensor(mask[:, t : t + 1].astype(dtype))
            keep = Tensor(1.0 - m.data)
            h = h_new * m + h * keep
            c = c_new * m + c * keep
        else:
            h, c = h_new, c_new
        outs[t] = h
    return stack(outs, axis=1)


def _frame(xs: Tensor, t: int) -> Tensor:
    """xs[:, t, :] as a (B, D) tensor on the tape."""
    def bwd(g):
        gx = np.zeros_like(xs.data)
        gx[:, t, :] = g
        xs._acc(gx)

    return Tensor._make(xs.data[:, t, :], (xs,), bwd)


class BiLSTM(Module):
    """Forward + reverse LSTM over the same input; outputs concatenated (B, T, 2H)."""

    def __init__(self, d_in: int, hidden: int, rng: RngStream, name: str, dtype=np.float32):
        self.fwd = LSTMCell(d_in, hidden, rng, f"{name}.fwd", dtype)
        self.bwd = LSTMCell(d_in, hidden, rng, f"{name}.bwd", dtype)
        self.hidden = hidden

    def __call__(self, xs: Tensor, mask: np.ndarray | None = None) -> Tensor:
        f = run_lstm(self.fwd, xs, mask, reverse=False)
        b = run_lstm(self.bwd, xs, mask, reverse=True)
        return concat([f, b], axis=-1)
