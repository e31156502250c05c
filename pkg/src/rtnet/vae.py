"""Variational bottleneck between the encoder and the inference network.

The reduction path becomes: h_reduce = relu(W_r [h_0;h_1;h_I] + b_r),
mu = relu(W_mu h_reduce + b_mu), sigma_hat = relu(W_sg h_reduce + b_sg),
z = mu + exp(sigma_hat/2) * eps, h_z = relu(W_e z + b_e). Both heads are
rectified — sigma_hat >= 0, so the encoder's sigma never drops below 1
during training; pushing the KL term to zero means saturating both heads
at exactly zero. The latent space is summarized per dialogue act by an
elementwise Gaussian (maximum-likelihood mean and population stddev), and
timing styles are mixed by linearly interpolating those per-act vectors.
"""
from __future__ import annotations

import warnings

import numpy as np

from .nn import Affine, Module
from .rng import RngStream
from .tensor import Tensor


def kl_value(mu, sigma_hat) -> float:
    """Closed-form KL(N(mu, exp(sigma_hat)) || N(0, I)), averaged over width.

    L_KL = -(1 / 2 N_z) * sum(1 + sigma_hat - mu^2 - exp(sigma_hat)).
    Nonnegative for all inputs (e^x >= 1 + x), zero only at mu=0, sigma_hat=0.
    """
    mu = np.asarray(mu, dtype=np.float64)
    sh = np.asarray(sigma_hat, dtype=np.float64)
    if mu.shape != sh.shape:
        raise ValueError(f"mu shape {mu.shape} != sigma_hat shape {sh.shape}")
    n_z = mu.shape[-1]
    inner = 1.0 + sh - mu * mu - np.exp(sh)
    per = -inner.sum(axis=-1) / (2.0 * n_z)
    return float(per.mean())


def kl_loss(mu: Tensor, sigma_hat: Tensor) -> Tensor:
    """Tape version of :func:`kl_value` over a (B, N_z) batch."""
    B, n_z = mu.data.shape
    inner = (sigma_hat + 1.0) - mu * mu - sigma_hat.exp()
    per = inner.sum(axis=1) * (-1.0 / (2.0 * n_z))
    return per.sum() * (1.0 / B)


class VaeHead(Module):
    """reduce -> (mu, sigma_hat) -> sample -> expand."""

    def __init__(
        self,
        d_in: int,
        reduce_dim: int,
        latent_dim: int,
        hz_dim: int,
        rng: RngStream,
        name: str = "vae",
        dtype=np.float32,
    ):
        self.reduce = Affine(d_in, reduce_dim, rng, f"{name}.reduce", dtype)
        self.mu_head = Affine(reduce_dim, latent_dim, rng, f"{name}.mu", dtype)
        self.sigma_head = Affine(reduce_dim, latent_dim, rng, f"{name}.sigma", dtype)
        self.expand = Affine(latent_dim, hz_dim, rng, f"{name}.expand", dtype)
        self.latent_dim = latent_dim
        self.hz_dim = hz_dim

    def heads(self, h_cat: Tensor) -> tuple:
        """(mu, sigma_hat) for a batch of encoder concatenations (B, d_in)."""
        h_reduce = self.reduce(h_cat).relu()
        mu = self.mu_head(h_reduce).relu()
        sigma_hat = self.sigma_head(h_reduce).relu()
        return mu, sigma_hat

    def forward(self, h_cat: Tensor, eps: np.ndarray | None = None) -> tuple:
        """Returns (h_z, mu, sigma_hat, z). eps=None means z = mu exactly."""
        mu, sigma_hat = self.heads(h_cat)
        if eps is None:
            z = mu
        else:
            sigma = (sigma_hat * 0.5).exp()
            z = mu + sigma * Tensor(np.asarray(eps, dtype=mu.data.dtype))
        h_z = self.expand(z).relu()
        return h_z, mu, sigma_hat, z

    def expand_z(self, z: np.ndarray) -> np.ndarray:
        """h_z for an externally chosen latent (act sampling, interpolation)."""
        zt = Tensor(np.asarray(z, dtype=self.expand.W.data.dtype))
        if zt.data.ndim == 1:
            zt = Tensor(zt.data[None, :])
            return self.expand(zt).relu().data[0]
        return self.expand(zt).relu().data


def vae_forward(head: VaeHead, h_cat: Tensor, rng: RngStream | None, sample: bool) -> tuple:
    """Contract wrapper: eps ~ N(0, I) when sampling, else eps = 0 (z = mu)."""
    if sample:
        if rng is None:
            raise ValueError("sampling requires an RngStream")
        eps = rng.normal(size=(h_cat.data.shape[0], head.latent_dim))
    else:
        eps = None
    h_z, mu, sigma_hat, z = head.forward(h_cat, eps)
    return h_z, {
        "mu": mu.data,
        "sigma_hat": sigma_hat.data,
        "sigma": np.exp(sigma_hat.data / 2.0),
        "z": z.data,
    }


def fit_latent_spec(z: np.ndarray, acts) -> dict:
    """Per-act elementwise mean and ML (population) stddev of latent vectors.

    z: (N, N_z); acts: length-N labels. Acts with fewer than 2 samples are
    skipped with a warning. Returns {act: (mu, sigma)}.
    """
    z = np.asarray(z, dtype=np.float64)
    acts = list(acts)
    if len(acts) != z.shape[0]:
        raise ValueError("acts length must match number of latent samples")
    spec = {}
    for act in sorted(set(acts)):
        rows = z[[i for i, a in enumerate(acts) if a == act]]
        if rows.shape[0] < 2:
            warnings.warn(f"act {act!r} has fewer than 2 latent samples; skipped", RuntimeWarning)
            continue
        spec[act] = (rows.mean(axis=0), rows.std(axis=0))  # ddof=0: ML estimate
    return spec


def latent_vector(spec: dict, act: str, rng: RngStream | None = None, mode: str = "mean") -> np.ndarray:
    """A latent for an act: its mean, or a draw from its fitted Gaussian."""
    if act not in spec:
        raise KeyError(f"act {act!r} not in latent spec (have {sorted(spec)})")
    mu, sigma = spec[act]
    if mode == "mean":
        return np.array(mu, dtype=np.float64)
    if mode == "sample":
        if rng is None:
            raise ValueError("mode='sample' requires an RngStream")
        return mu + sigma * rng.normal(size=len(mu))
    raise ValueError(f"unknown latent mode {mode!r}")


def interpolate_latents(spec: dict, act_a: str, act_b: str, alpha: float) -> tuple:
    """Linear blend of two acts' latent Gaussians: ((1-a)mu_a + a mu_b, same for sigma)."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must be in [0, 1], got {alpha}")
    for act in (act_a, act_b):
        if act not in spec:
            raise KeyError(f"act {act!r} not in latent spec (have {sorted(spec)})")
    mu_a, sg_a = spec[act_a]
    mu_b, sg_b = spec[act_b]
    return (1 - alpha) * mu_a + alpha * mu_b, (1 - alpha) * sg_a + alpha * sg_b
