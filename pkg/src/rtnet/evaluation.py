"""Held-out metrics: deterministic losses, sampled MAE, and offset
distribution summaries (histograms, CDF distances, region cutoffs).
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .dataset import make_batch
from .inference import sample_offsets
from .losses import bce_masked
from .tensor import no_grad
from .vae import kl_value

HIST_LO_MS = -2000.0
HIST_HI_MS = 4000.0
BIN_MS = 50.0


# -- losses ----------------------------------------------------------------


def evaluate_losses(model, examples, silence_template, batch_size: int = 64):
    """Deterministic (bce, kl) over examples.

    The scored region is anchored at its lower bound and the variational
    path uses the posterior mean, so repeat calls are bit-identical.
    """
    if not examples:
        raise ValueError("no examples")
    bces, kls, weights = [], [], []
    with no_grad():
        for lo in range(0, len(examples), batch_size):
            chunk = examples[lo : lo + batch_size]
            batch = make_batch(chunk, silence_template, dtype=model.dtype)
            h_z, stats = model.encode_h_z(batch)
            y = model.trigger_probs(batch, h_z)
            mask = batch.loss_mask(batch.r_start)
            bces.append(bce_masked(y.data, batch.labels, mask) * len(chunk))
            if stats is not None:
                kls.append(
                    kl_value(stats["mu"].data, stats["sigma_hat"].data) * len(chunk)
                )
            weights.append(len(chunk))
    n = float(sum(weights))
    bce = float(sum(bces) / n)
    kl = float(sum(kls) / n) if kls else 0.0
    return bce, kl


def evaluate_mae(
    model,
    examples,
    silence_template,
    seed: int,
    n_runs: int = 3,
    pad_frames: int = 80,
    batch_size: int = 64,
    vae_sample: bool = False,
) -> dict:
    """Sampled mean-absolute-error against ground-truth offsets.

    Each run regenerates every pair once with a randomized region anchor;
    censored samples stay in the average at their pinned value and are
    reported as a fraction.
    """
    if not examples:
        raise ValueError("no examples")
    samples = sample_offsets(
        model,
        examples,
        silence_template,
        seed=seed,
        n_runs=n_runs,
        pad_frames=pad_frames,
        batch_size=batch_size,
        vae_sample=vae_sample,
    )
    per_run = []
    n = len(examples)
    for run in range(n_runs):
        chunk = samples[run * n : (run + 1) * n]
        per_run.append(
            float(np.mean([abs(s.offset_ms - s.true_offset_ms) for s in chunk]))
        )
    censored = sum(1 for s in samples if s.censored)
    mae_ms = float(np.mean(per_run))
    return {
        "mae_s": mae_ms / 1000.0,
        "mae_ms": mae_ms,
        "per_run_ms": per_run,
        "censored_frac": censored / len(samples),
        "n_pairs": n,
        "n_runs": n_runs,
    }


# -- distributions ----------------------------------------------------------


@dataclass
class OffsetHistogram:
    edges: np.ndarray  # (n_bins + 1,) ms, strictly increasing
    counts: np.ndarray  # (n_bins,) raw counts
    bin_ms: float
    n_samples: int

    @property
    def centers(self) -> np.ndarray:
        return (self.edges[:-1] + self.edges[1:]) / 2.0

    @property
    def normalized(self) -> np.ndarray:
        return self.counts / max(self.n_samples, 1)


def offset_histogram(
    offsets_ms,
    bin_ms: float = BIN_MS,
    lo_ms: float = HIST_LO_MS,
    hi_ms: float = HIST_HI_MS,
) -> OffsetHistogram:
    """Fixed-grid histogram; out-of-range samples clip into the end bins."""
    x = np.asarray(offsets_ms, dtype=np.float64)
    if x.size == 0:
        raise ValueError("no offsets")
    n_bins = int(round((hi_ms - lo_ms) / bin_ms))
    idx = np.clip(np.floor((x - lo_ms) / bin_ms).astype(int), 0, n_bins - 1)
    counts = np.bincount(idx, minlength=n_bins).astype(np.int64)
    edges = lo_ms + bin_ms * np.arange(n_bins + 1)
    return OffsetHistogram(edges=edges, counts=counts, bin_ms=bin_ms, n_samples=x.size)


def distribution_distance(h1: OffsetHistogram, h2: OffsetHistogram) -> tuple[float, float]:
    """(KS statistic, earth-mover distance in ms) between two histograms.

    Both are computed on the binned CDFs: KS is the largest CDF gap, EMD
    the integral of the gap over the grid.
    """
    if h1.edges.shape != h2.edges.shape or not np.allclose(h1.edges, h2.edges):
        raise ValueError("histograms use different grids")
    c1 = np.cumsum(h1.normalized)
    c2 = np.cumsum(h2.normalized)
    gap = np.abs(c1 - c2)
    return float(gap.max()), float(gap.sum() * h1.bin_ms)


@dataclass
class RegionCutoffs:
    mode_ms: float
    early_cutoff_ms: float
    late_cutoff_ms: float


def offset_region_cutoffs(offsets_ms, bin_ms: float = BIN_MS) -> RegionCutoffs:
    """Mode bin center plus medians of the strictly-below/above groups.

    An empty side collapses its cutoff onto the mode, keeping the
    early <= mode <= late ordering.
    """
    x = np.asarray(offsets_ms, dtype=np.float64)
    if x.size < 3:
        raise ValueError("need at least 3 samples")
    hist = offset_histogram(x, bin_ms=bin_ms)
    mode = float(hist.centers[int(np.argmax(hist.counts))])
    below = x[x < mode]
    above = x[x > mode]
    early = float(np.median(below)) if below.size else mode
    late = float(np.median(above)) if above.size else mode
    return RegionCutoffs(mode_ms=mode, early_cutoff_ms=early, late_cutoff_ms=late)


def per_act_offsets(samples) -> dict:
    """Group sampled offsets by act tag -> {act: float array}."""
    acts: dict = {}
    for s in samples:
        acts.setdefault(s.act, []).append(s.offset_ms)
    return {a: np.asarray(v, dtype=np.float64) for a, v in acts.items()}


# -- reports -----------------------------------------------------------------


def render_report(report: dict) -> str:
    """Deterministic serialization (sorted keys, fixed float handling)."""
    return json.dumps(_plain(report), sort_keys=True, indent=2) + "\n"


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        return round(float(obj), 9)
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def histogram_table(hist: OffsetHistogram) -> list:
    """Nonzero rows of (bin center ms, count) for report embedding."""
    return [
        [float(c), int(n)]
        for c, n in zip(hist.centers, hist.counts)
        if n > 0
    ]


def save_histogram_csv(path, hist: OffsetHistogram) -> None:
    with open(path, "w") as f:
        f.write("bin_center_ms,count\n")
        for c, n in zip(hist.centers, hist.counts):
            f.write(f"{c:.1f},{int(n)}\n")
