"""Turning per-frame trigger probabilities into response offsets.

Generation walks the scored region frame by frame, firing with the
frame's probability; the system is taken to start speaking on the frame
after the trigger. Runs are reproducible pair-by-pair: each pair gets
its own derived random stream, so batching and run order don't matter.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .corpus import FRAME_MS
from .dataset import make_batch
from .rng import RngStream
from .tensor import no_grad


@dataclass
class OffsetSample:
    pair_id: str
    act: str | None
    offset_ms: float
    trigger_frame: int
    censored: bool
    true_offset_ms: float


def zero_before_start(probs: np.ndarray, starts) -> np.ndarray:
    """Copy of (B, T) probabilities with frames before each start zeroed."""
    t = np.arange(probs.shape[1])[None, :]
    return np.where(t < np.asarray(starts)[:, None], 0.0, probs)


def draw_trigger(
    probs: np.ndarray, r_start: int, seq_len: int, rng: RngStream
) -> tuple[int, bool]:
    """First frame in [r_start, seq_len) whose Bernoulli draw fires.

    Returns (frame, censored); a run with no trigger is pinned to the
    final frame and flagged. Draws are consumed for every candidate frame
    so the outcome doesn't depend on where later frames would have fired.
    """
    if not 0 <= r_start < seq_len:
        raise ValueError(f"r_start {r_start} outside [0, {seq_len})")
    u = rng.uniform(size=seq_len - r_start)
    hits = np.flatnonzero(u < probs[r_start:seq_len])
    if hits.size:
        return r_start + int(hits[0]), False
    return seq_len - 1, True


def sample_offsets(
    model,
    examples,
    silence_template: np.ndarray,
    seed: int,
    n_runs: int = 1,
    pad_frames: int = 80,
    batch_size: int = 64,
    vae_sample: bool = False,
    h_z_override: np.ndarray | None = None,
    randomize_start: bool = True,
) -> list[OffsetSample]:
    """Generate an offset for every example, n_runs times over.

    h_z_override bypasses the encoder with a fixed conditioning vector
    (1-D, shared across the batch) -- the hook for latent-space control.
    """
    out: list[OffsetSample] = []
    with no_grad():
        for run in range(n_runs):
            for lo in range(0, len(examples), batch_size):
                chunk = examples[lo : lo + batch_size]
                batch = make_batch(chunk, silence_template, pad_frames=pad_frames)
                if h_z_override is not None:
                    h_z = np.broadcast_to(
                        np.asarray(h_z_override, dtype=model.dtype),
                        (batch.size, model.config.hz_dim),
                    )
                    probs = model.trigger_probs(batch, h_z).data
                else:
                    eps = None
                    if vae_sample and model.config.variant == "vae":
                        eps = np.stack(
                            [
                                RngStream.derive(seed, "eps", run, e.pair_id)
                                .normal(size=model.config.latent_dim)
                                .astype(model.dtype)
                                for e in chunk
                            ]
                        )
                    h_z, _ = model.encode_h_z(batch, eps=eps)
                    probs = model.trigger_probs(batch, h_z).data
                for b, e in enumerate(chunk):
                    pair_rng = RngStream.derive(seed, "sample", run, e.pair_id)
                    if randomize_start:
                        start = int(pair_rng.integers(e.r_start, e.r_end + 1))
                    else:
                        start = e.r_start
                    frame, censored = draw_trigger(
                        probs[b], start, int(batch.seq_len[b]), pair_rng
                    )
                    out.append(
                        OffsetSample(
                            pair_id=e.pair_id,
                            act=e.act,
                            offset_ms=float(FRAME_MS * (frame - e.user_last)),
                            trigger_frame=frame,
                            censored=censored,
                            true_offset_ms=float(e.true_offset_ms),
                        )
                    )
    return out


def sample_constant_offsets(
    examples,
    y: float,
    seed: int,
    n_runs: int = 1,
    pad_frames: int = 80,
    randomize_start: bool = True,
) -> list[OffsetSample]:
    """The fixed-probability baseline under the exact sampling protocol."""
    if not 0.0 < y < 1.0:
        raise ValueError("y must lie strictly inside (0, 1)")
    out: list[OffsetSample] = []
    for run in range(n_runs):
        for e in examples:
            seq_len = len(e.x_ling) + pad_frames
            probs = np.full(seq_len, y)
            pair_rng = RngStream.derive(seed, "sample", run, e.pair_id)
            if randomize_start:
                start = int(pair_rng.integers(e.r_start, e.r_end + 1))
            else:
                start = e.r_start
            frame, censored = draw_trigger(probs, start, seq_len, pair_rng)
            out.append(
                OffsetSample(
                    pair_id=e.pair_id,
                    act=e.act,
                    offset_ms=float(FRAME_MS * (frame - e.user_last)),
                    trigger_frame=frame,
                    censored=censored,
                    true_offset_ms=float(e.true_offset_ms),
                )
            )
    return out


def fixed_probability_baseline(examples) -> tuple[float, float]:
    """Best constant trigger probability and its scored-region loss.

    With one positive frame per region, the per-pair mean cross-entropy
    is minimized by y = E[1/|R|] across pairs; the loss is evaluated in
    closed form with the region anchored at its lower bound.
    """
    if not examples:
        raise ValueError("no examples")
    # exact rational mean, rounded once: mean(1/10, 1/20) really is 0.075
    total = sum(Fraction(1, int(e.r_length)) for e in examples)
    y = float(total / len(examples))
    return y, constant_probability_loss(examples, y)


def constant_probability_loss(examples, y: float) -> float:
    """Mean over pairs of the per-pair mean BCE for a constant probability."""
    if not 0.0 < y < 1.0:
        raise ValueError("y must lie strictly inside (0, 1)")
    losses = []
    for e in examples:
        n = e.r_length
        losses.append(((n - 1) * -np.log1p(-y) + -np.log(y)) / n)
    return float(np.mean(losses))
