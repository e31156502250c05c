"""Seeded minibatch training for response-timing models.

Each iteration draws a batch of pairs, a fresh scored-region anchor per
pair, and (for the variational model) one noise vector per pair, all
from a single derived random stream so the whole run replays exactly
from its seed.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dataset import make_batch
from .losses import masked_bce_loss
from .optim import Adam
from .rng import RngStream
from .vae import kl_loss


@dataclass
class TrainConfig:
    iterations: int = 1000
    batch_size: int = 64
    lr: float = 5e-4
    l2: float = 1e-5
    w_kl: float = 1.0
    lr_schedule: tuple = ()  # ((iteration, factor), ...)
    seed: int = 0
    log_every: int = 100

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be positive")
        if self.w_kl < 0:
            raise ValueError("w_kl must be nonnegative")


def training_step(model, batch, r_starts: np.ndarray, w_kl: float, eps=None):
    """One forward pass -> (total loss Tensor, {"bce": float, "kl": float})."""
    h_z, stats = model.encode_h_z(batch, eps=eps)
    y = model.trigger_probs(batch, h_z)
    bce = masked_bce_loss(y, batch.labels, batch.loss_mask(r_starts))
    parts = {"bce": float(bce.data), "kl": 0.0}
    total = bce
    if stats is not None:
        kl = kl_loss(stats["mu"], stats["sigma_hat"])
        parts["kl"] = float(kl.data)
        total = bce + kl * w_kl
    return total, parts


def train(model, examples, silence_template, cfg: TrainConfig, on_log=None) -> list:
    """Run the optimization; returns the loss history.

    History entries: {"iteration", "loss", "bce", "kl", "lr"} at every
    log_every-th step and the final one. on_log, if given, receives each
    entry as it is recorded.
    """
    if not examples:
        raise ValueError("no training examples")
    opt = Adam(
        model.parameters(),
        lr=cfg.lr,
        l2=cfg.l2,
        schedule=cfg.lr_schedule,
    )
    data_rng = RngStream.derive(cfg.seed, "train")
    n = len(examples)
    history = []
    for it in range(cfg.iterations):
        idx = data_rng.choice(n, size=cfg.batch_size, replace=cfg.batch_size > n)
        batch = make_batch([examples[i] for i in idx], silence_template, dtype=model.dtype)
        r_starts = batch.sample_r_starts(data_rng)
        eps = None
        if model.config.variant == "vae" and model.config.encoder_mode != "none":
            eps = model.draw_eps(batch.size, data_rng)
        loss, parts = training_step(model, batch, r_starts, cfg.w_kl, eps=eps)
        opt.zero_grad()
        loss.backward()
        opt.step()
        if it % cfg.log_every == 0 or it == cfg.iterations - 1:
            entry = {
                "iteration": it,
                "loss": float(loss.data),
                "bce": parts["bce"],
                "kl": parts["kl"],
                "lr": opt.effective_lr(opt.t),
            }
            history.append(entry)
            if on_log is not None:
                on_log(entry)
    return history
