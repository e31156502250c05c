"""The response-timing model: response encoder -> latent -> trigger recurrence.

Two variants share every component except the reduction from the encoder
summary to the conditioning vector h_z: "plain" uses a single rectified
affine map, "vae" replaces it with a variational bottleneck whose latent
can later be steered directly.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .checkpoint import load_checkpoint, save_checkpoint
from .encoder import ENCODER_MODES, Encoder
from .nn import Affine, Embedding, LSTMCell, Module, run_lstm
from .rng import RngStream
from .tensor import Tensor, concat, tile_time
from .vae import VaeHead

VARIANTS = ("plain", "vae")
USER_MODES = ("both", "acoustic", "linguistic")


@dataclass
class ModelConfig:
    variant: str = "plain"
    d_acoustic: int = 4
    vocab_size: int = 64
    embedding_dim: int = 16
    acoustic_hidden: int = 32
    linguistic_hidden: int = 32
    master_hidden: int = 64
    reduce_dim: int = 64
    latent_dim: int = 4
    hz_dim: int = 64
    inference_hidden: int = 64
    encoder_mode: str = "full"
    user_mode: str = "both"
    seed: int = 0

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if self.encoder_mode not in ENCODER_MODES:
            raise ValueError(
                f"encoder_mode must be one of {ENCODER_MODES}, got {self.encoder_mode!r}"
            )
        if self.user_mode not in USER_MODES:
            raise ValueError(f"user_mode must be one of {USER_MODES}, got {self.user_mode!r}")
        for name in (
            "d_acoustic",
            "vocab_size",
            "embedding_dim",
            "acoustic_hidden",
            "linguistic_hidden",
            "master_hidden",
            "reduce_dim",
            "latent_dim",
            "hz_dim",
            "inference_hidden",
        ):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(**d)


class ResponseTimingModel(Module):
    """End-to-end trigger model over padded turn-pair batches."""

    def __init__(self, config: ModelConfig, dtype=np.float32):
        self.config = config
        self.dtype = dtype
        rng = RngStream.derive(config.seed, "init")
        cfg = config
        self.embedding = Embedding(cfg.vocab_size, cfg.embedding_dim, rng, "emb", dtype=dtype)
        self.encoder = None
        self.reduce = None
        self.vae = None
        if cfg.encoder_mode != "none":
            self.encoder = Encoder(
                cfg.d_acoustic,
                self.embedding,
                cfg.acoustic_hidden,
                cfg.linguistic_hidden,
                cfg.master_hidden,
                rng,
                dtype=dtype,
            )
            if cfg.variant == "vae":
                self.vae = VaeHead(
                    self.encoder.out_dim,
                    cfg.reduce_dim,
                    cfg.latent_dim,
                    cfg.hz_dim,
                    rng,
                    dtype=dtype,
                )
            else:
                self.reduce = Affine(self.encoder.out_dim, cfg.hz_dim, rng, "reduce", dtype=dtype)
        d_user = cfg.d_acoustic + cfg.embedding_dim
        self.inference = LSTMCell(d_user + cfg.hz_dim, cfg.inference_hidden, rng, "inf", dtype=dtype)
        self.out = Affine(cfg.inference_hidden, 1, rng, "out", dtype=dtype)

    # -- conditioning ------------------------------------------------------

    def encode_h_z(self, batch, eps: np.ndarray | None = None):
        """Condition on the response side.

        Returns (h_z, stats). For the plain variant stats is None. For the
        vae variant stats holds mu/sigma_hat Tensors plus the sampled (or
        mean) z as an array; pass eps to sample, leave None for z = mu.
        """
        B = batch.size
        if self.config.encoder_mode == "none":
            return Tensor(np.zeros((B, self.config.hz_dim), dtype=self.dtype)), None
        h_cat = self.encoder.encode(batch, mode=self.config.encoder_mode)
        if self.config.variant == "vae":
            h_z, mu, sigma_hat, z = self.vae.forward(h_cat, eps=eps)
            return h_z, {"mu": mu, "sigma_hat": sigma_hat, "z": z}
        return self.reduce(h_cat).relu(), None

    def draw_eps(self, batch_size: int, rng: RngStream) -> np.ndarray:
        return rng.normal(size=(batch_size, self.config.latent_dim)).astype(self.dtype)

    def h_z_from_latent(self, z: np.ndarray) -> np.ndarray:
        """Decode an externally chosen latent vector (vae variant only)."""
        if self.vae is None:
            raise ValueError("h_z_from_latent requires the vae variant")
        return self.vae.expand_z(z.astype(self.dtype))

    # -- trigger recurrence ------------------------------------------------

    def user_features(self, batch) -> Tensor:
        """(B, T, d_acoustic + embedding_dim); the ablated stream is zeroed."""
        ac = Tensor(batch.x_ac.astype(self.dtype))
        emb = self.embedding(batch.x_ling)
        mode = self.config.user_mode
        if mode == "acoustic":
            emb = Tensor(np.zeros_like(emb.data))
        elif mode == "linguistic":
            ac = Tensor(np.zeros_like(ac.data))
        return concat([ac, emb], axis=-1)

    def trigger_probs(self, batch, h_z: Tensor | np.ndarray) -> Tensor:
        """Per-frame trigger probabilities (B, T); padding frames are inert."""
        if not isinstance(h_z, Tensor):
            h_z = Tensor(np.asarray(h_z, dtype=self.dtype))
        x = self.user_features(batch)
        T = x.data.shape[1]
        inp = concat([x, tile_time(h_z, T)], axis=-1)
        hs = run_lstm(self.inference, inp, mask=batch.frame_mask)
        y = self.out(hs).sigmoid()
        B = y.data.shape[0]
        return y.reshape(B, T)

    # -- persistence -------------------------------------------------------

    def save(self, path, extra: dict | None = None) -> None:
        """Write a checkpoint; extra (e.g. the run profile) rides along."""
        config = {"model": self.config.to_dict()}
        if extra:
            config.update(extra)
        save_checkpoint(path, self.parameters(), config)

    @classmethod
    def load(cls, path, dtype=np.float32) -> "ResponseTimingModel":
        return cls.load_with_config(path, dtype=dtype)[0]

    @classmethod
    def load_with_config(cls, path, dtype=np.float32):
        """(model, stored config dict) — the dict keeps any extra sections."""
        config, tensors = load_checkpoint(path)
        model = cls(ModelConfig.from_dict(config["model"]), dtype=dtype)
        own = {p.name: p for p in model.parameters()}
        if set(own) != set(tensors):
            missing = sorted(set(own) - set(tensors))
            extra = sorted(set(tensors) - set(own))
            raise ValueError(f"checkpoint mismatch: missing={missing} extra={extra}")
        for name, p in own.items():
            arr = tensors[name].astype(dtype)
            if arr.shape != p.data.shape:
                raise ValueError(
                    f"checkpoint tensor {name}: shape {arr.shape} != {p.data.shape}"
                )
            p.data = arr
        return model, config

    def astype(self, dtype) -> "ResponseTimingModel":
        """Copy of the model with every parameter cast (e.g. for gradient checks)."""
        clone = ResponseTimingModel(self.config, dtype=dtype)
        src = {p.name: p for p in self.parameters()}
        for p in clone.parameters():
            p.data = src[p.name].data.astype(dtype)
        return clone
