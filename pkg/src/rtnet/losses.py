"""Masked binary cross-entropy with the per-pair averaging convention.

Losses average within each turn pair first, then across the batch, so every
pair contributes equally regardless of how many frames its scored region
spans. This convention is load-bearing: it is what makes the constant
fixed-probability baseline y = E[1/|R|] the exact BCE minimizer among
constant predictors (see tests for the proof-by-grid).
"""
from __future__ import annotations

import warnings

import numpy as np

from .tensor import Tensor

CLAMP_EPS = 1e-7


def bce_masked(probs, targets, mask) -> float:
    """Masked BCE over one pair (1-D inputs) or a batch of pairs (2-D).

    Probabilities outside (0, 1) are clamped at 1e-7 from each end and a
    warning is emitted if any masked-in frame needed clamping. Raises
    ValueError if any pair has no masked-in frame.
    """
    p = np.asarray(probs, dtype=np.float64)
    t = np.asarray(targets, dtype=np.float64)
    m = np.asarray(mask, dtype=np.float64)
    if not (p.shape == t.shape == m.shape):
        raise ValueError(f"shape mismatch: probs {p.shape}, targets {t.shape}, mask {m.shape}")
    squeeze = p.ndim == 1
    if squeeze:
        p, t, m = p[None, :], t[None, :], m[None, :]
    counts = m.sum(axis=1)
    if np.any(counts == 0):
        raise ValueError("bce_masked: a pair has no masked-in frames")
    clamped = np.clip(p, CLAMP_EPS, 1.0 - CLAMP_EPS)
    if np.any((clamped != p) & (m > 0)):
        warnings.warn("bce_masked: probabilities outside (0, 1) were clamped", RuntimeWarning)
    nll = -(t * np.log(clamped) + (1.0 - t) * np.log(1.0 - clamped))
    per_pair = (nll * m).sum(axis=1) / counts
    return float(per_pair.mean())


def masked_bce_loss(y: Tensor, targets: np.ndarray, mask: np.ndarray) -> Tensor:
    """Tape-graph BCE, same convention as :func:`bce_masked`.

    y: (B, T) probabilities on the tape; targets/mask: (B, T) arrays.
    Clamping happens inside the graph (zero gradient on clamped frames).
    """
    t = np.asarray(targets, dtype=y.data.dtype)
    m = np.asarray(mask, dtype=y.data.dtype)
    counts = m.sum(axis=1)
    if np.any(counts == 0):
        raise ValueError("masked_bce_loss: a pair has no masked-in frames")
    p = y.clip(CLAMP_EPS, 1.0 - CLAMP_EPS)
    nll = -(p.log() * t + (1.0 - p).log() * (1.0 - t))
    per_pair = (nll * m).sum(axis=1) * (1.0 / counts)
    return per_pair.sum() * (1.0 / y.data.shape[0])
