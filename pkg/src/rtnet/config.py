"""Run profiles: `key = value` config files driving the command line.

A profile collects the corpus, model, and optimization knobs in one
flat namespace. Unknown keys and malformed values fail with the field
named, so a typo in a profile surfaces immediately.
"""
from __future__ import annotations

from dataclasses import dataclass, fields

from .model import ENCODER_MODES, USER_MODES, ModelConfig
from .training import TrainConfig

VARIANT_NAMES = {"rtnet": "plain", "rtnet-vae": "vae"}


@dataclass
class RunConfig:
    # model
    variant: str = "rtnet"  # rtnet | rtnet-vae
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
    # optimization
    iterations: int = 1500
    batch_size: int = 32
    lr: float = 5e-4
    l2: float = 1e-5
    w_kl: float = 1e-4
    lr_schedule: tuple = ()
    # synthetic corpus
    n_pairs: int = 2000
    acts: tuple = (("fast", -100.0, 150.0), ("slow", 400.0, 150.0))
    vocab_size: int = 48
    acoustic_dim: int = 4
    # protocol
    test_frac: float = 0.15
    pad_frames: int = 80
    mae_runs: int = 3
    seed: int = 0

    def __post_init__(self):
        if self.variant not in VARIANT_NAMES:
            raise ValueError(
                f"variant: expected one of {sorted(VARIANT_NAMES)}, got {self.variant!r}"
            )
        if self.encoder_mode not in ENCODER_MODES:
            raise ValueError(
                f"encoder_mode: expected one of {ENCODER_MODES}, got {self.encoder_mode!r}"
            )
        if self.user_mode not in USER_MODES:
            raise ValueError(f"user_mode: expected one of {USER_MODES}, got {self.user_mode!r}")
        if self.w_kl < 0:
            raise ValueError(f"w_kl: must be >= 0, got {self.w_kl}")
        if not 0.0 < self.test_frac < 1.0:
            raise ValueError(f"test_frac: must lie in (0, 1), got {self.test_frac}")
        if self.pad_frames < 1:
            raise ValueError(f"pad_frames: must be positive, got {self.pad_frames}")
        if self.mae_runs < 1:
            raise ValueError(f"mae_runs: must be positive, got {self.mae_runs}")
        for name in ("iterations", "batch_size", "n_pairs", "vocab_size"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name}: must be positive, got {getattr(self, name)}")

    # -- derived configs -----------------------------------------------------

    def model_config(self, vocab_n_ids: int) -> ModelConfig:
        return ModelConfig(
            variant=VARIANT_NAMES[self.variant],
            d_acoustic=self.acoustic_dim,
            vocab_size=vocab_n_ids,
            embedding_dim=self.embedding_dim,
            acoustic_hidden=self.acoustic_hidden,
            linguistic_hidden=self.linguistic_hidden,
            master_hidden=self.master_hidden,
            reduce_dim=self.reduce_dim,
            latent_dim=self.latent_dim,
            hz_dim=self.hz_dim,
            inference_hidden=self.inference_hidden,
            encoder_mode=self.encoder_mode,
            user_mode=self.user_mode,
            seed=self.seed,
        )

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            iterations=self.iterations,
            batch_size=self.batch_size,
            lr=self.lr,
            l2=self.l2,
            w_kl=self.w_kl,
            lr_schedule=self.lr_schedule,
            seed=self.seed,
        )

    def synth_config(self):
        from .corpus import SynthConfig

        return SynthConfig(
            n_pairs=self.n_pairs,
            acts=list(self.acts),
            acoustic_dim=self.acoustic_dim,
            vocab_size=self.vocab_size,
            seed=self.seed,
        )

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            if f.name == "acts":
                v = [list(a) for a in v]
            elif f.name == "lr_schedule":
                v = [list(s) for s in v]
            out[f.name] = v
        return out


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def parse_config_text(text: str, overrides: dict | None = None) -> RunConfig:
    """Parse `key = value` lines (# comments, blank lines allowed)."""
    values: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, val = line.partition("=")
        key = key.strip()
        if key not in _FIELD_TYPES:
            raise ValueError(f"line {lineno}: unknown config field {key!r}")
        try:
            values[key] = _parse_value(key, val.strip())
        except ValueError as exc:
            raise ValueError(f"line {lineno}: {exc}") from exc
    if overrides:
        values.update(overrides)
    try:
        return RunConfig(**values)
    except TypeError as exc:
        raise ValueError(str(exc)) from exc


def load_config(path, overrides: dict | None = None) -> RunConfig:
    with open(path) as f:
        text = f.read()
    try:
        return parse_config_text(text, overrides)
    except ValueError as exc:
        raise ValueError(f"{path}: {exc}") from exc


def _parse_value(key: str, val: str):
    try:
        if key == "acts":
            return tuple(_parse_act(part) for part in val.split(",") if part.strip())
        if key == "lr_schedule":
            if not val:
                return ()
            return tuple(_parse_milestone(part) for part in val.split(",") if part.strip())
        kind = _FIELD_TYPES[key]
        if kind == "int":
            return int(val)
        if kind == "float":
            return float(val)
        return val
    except ValueError as exc:
        raise ValueError(f"field {key!r}: {exc}") from exc


def _parse_act(part: str):
    bits = part.strip().split(":")
    if len(bits) != 3:
        raise ValueError(f"act spec needs name:mean_ms:std_ms, got {part.strip()!r}")
    return (bits[0], float(bits[1]), float(bits[2]))


def _parse_milestone(part: str):
    bits = part.strip().split(":")
    if len(bits) != 2:
        raise ValueError(f"schedule entry needs iteration:factor, got {part.strip()!r}")
    return (int(bits[0]), float(bits[1]))
