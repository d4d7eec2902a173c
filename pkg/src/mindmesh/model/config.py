"""Architecture, loss and training settings, all JSON round-trippable."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

from ..errors import ConfigError


class _Serializable:
    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict | None):
        d = dict(d or {})
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown {cls.__name__} settings: {sorted(unknown)}")
        for f in dataclasses.fields(cls):
            if f.name in d and isinstance(d[f.name], list):
                d[f.name] = tuple(d[f.name])
        return cls(**d)


@dataclass(frozen=True)
class EncoderConfig(_Serializable):
    channels: int = 16
    window: int = 375
    temporal_kernel: int = 25
    stem_channels: int = 40
    spatial_kernel: int = 16
    pool_kernel: int = 75
    pool_stride: int = 15
    embed_dim: int = 40
    layers: int = 6
    heads: int = 10
    ff_multiplier: int = 4
    dropout: float = 0.5
    activation: str = "gelu"
    positional: str = "none"          # or "learned"

    def __post_init__(self):
        if self.embed_dim % self.heads:
            raise ConfigError(f"embed_dim {self.embed_dim} is not divisible by heads {self.heads}")
        if self.spatial_kernel != self.channels:
            raise ConfigError("the spatial convolution must span all electrode channels")
        if self.pooled_width < 1:
            raise ConfigError("window too short for the temporal kernel and pooling")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError("dropout must lie in [0, 1)")
        if self.positional not in ("none", "learned"):
            raise ConfigError(f"unknown positional encoding {self.positional!r}")

    @property
    def pooled_width(self) -> int:
        return self.window - self.temporal_kernel + 1 - self.pool_kernel

    @property
    def tokens(self) -> int:
        return self.pooled_width // self.pool_stride + 1


@dataclass(frozen=True)
class DecoderConfig(_Serializable):
    tokens: int = 19
    embed_dim: int = 40
    projection_widths: tuple[int, ...] = (512, 256)
    latent_channels: int = 4
    latent_size: int = 8
    upsampler_stages: int = 3
    upsampler_channels: tuple[int, ...] = (32, 16)
    coarse_channels: int = 3
    transposed_stages: int = 2
    transposed_hidden: int = 16
    output_channels: int = 3
    output_gain: float = 0.01          # init scale of the last layer, so the untrained map starts near zero

    def __post_init__(self):
        if self.projection_widths[-1] != self.latent_channels * self.latent_size ** 2:
            raise ConfigError(f"last projection width {self.projection_widths[-1]} must equal "
                              f"{self.latent_channels}x{self.latent_size}x{self.latent_size}")
        if len(self.upsampler_channels) < self.upsampler_stages - 1:
            raise ConfigError("upsampler_channels needs one entry per stage except the last")
        if self.transposed_stages < 1:
            raise ConfigError("at least one transposed stage is required")

    @property
    def input_width(self) -> int:
        return self.tokens * self.embed_dim

    @property
    def output_size(self) -> int:
        return self.latent_size * 2 ** (self.upsampler_stages + self.transposed_stages)


@dataclass(frozen=True)
class LossWeights(_Serializable):
    lambda_rec: float = 1.0
    lambda_smooth: float = 0.1

    def __post_init__(self):
        if self.lambda_rec < 0 or self.lambda_smooth < 0:
            raise ConfigError("loss weights must be non-negative")


@dataclass(frozen=True)
class TrainConfig(_Serializable):
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    batch: int = 8
    epochs: int = 25                   # about 3500 steps on the default dataset
    max_steps: int = 0                 # 0 means no cap beyond epochs
    seed: int = 0
    log_every: int = 1
    checkpoint_every: int = 0          # steps; 0 keeps only the final checkpoint
    holdout_trials: tuple[str, ...] = ()   # empty: trials whose role is "holdout"

    def __post_init__(self):
        if self.lr < 0 or self.batch < 1 or self.epochs < 0 or self.max_steps < 0:
            raise ConfigError("lr >= 0, batch >= 1, epochs >= 0 and max_steps >= 0 are required")
