"""Configuration for the synthetic paired EEG / face-geometry generator."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

from ..errors import ConfigError


@dataclass(frozen=True)
class SynthConfig:
    seed: int = 0
    latent_dim: int = 8
    trials: int = 5
    holdout_trials: int = 1
    segments_per_trial: int = 6
    fps: float = 30.0
    duration_per_segment: float = 1.5
    noise_snr_db: float = 10.0
    sample_rate: float = 125.0
    channels: int = 16
    lead_in: float = 3.0                 # seconds of EEG before the first frame
    latent_bandwidth_hz: float = 0.2
    grid: tuple[int, int] = (50, 50)     # vertex rows x cols of the face proxy
    radii: tuple[float, float, float] = (0.08, 0.11, 0.09)
    deform_rms: float = 0.003            # per-vertex RMS displacement of a unit coefficient
    carrier_low_hz: float = 6.0
    carrier_step_hz: float = 1.6
    resolution: int = 256

    def __post_init__(self):
        if self.latent_dim < 1:
            raise ConfigError("latent_dim must be at least 1")
        if self.trials < 1 or self.holdout_trials < 0:
            raise ConfigError("need at least one trial and a non-negative holdout count")
        if self.segments_per_trial < 2:
            raise ConfigError("each trial needs at least 2 segments (train and test)")
        if self.frames_per_segment < 1:
            raise ConfigError("duration_per_segment is shorter than one frame")
        if self.channels < 1 or self.sample_rate <= 0 or self.fps <= 0:
            raise ConfigError("channels, sample_rate and fps must be positive")
        top = self.carrier_low_hz + self.carrier_step_hz * (2 * self.latent_dim - 1)
        if self.carrier_low_hz - self.latent_bandwidth_hz < 4.0 or top + self.latent_bandwidth_hz > 40.0:
            raise ConfigError(f"carriers {self.carrier_low_hz}-{top} Hz do not fit inside the 4-40 Hz band")
        if min(self.grid) < 3 or min(self.radii) <= 0:
            raise ConfigError("grid must be at least 3x3 and radii positive")

    @property
    def frames_per_segment(self) -> int:
        return int(round(self.duration_per_segment * self.fps))

    @property
    def frames_per_trial(self) -> int:
        return self.frames_per_segment * self.segments_per_trial

    @property
    def lead_in_frames(self) -> int:
        return int(round(self.lead_in * self.fps))

    @property
    def carrier_frequencies(self) -> list[float]:
        return [self.carrier_low_hz + self.carrier_step_hz * j for j in range(2 * self.latent_dim)]

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> SynthConfig:
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown synth settings: {sorted(unknown)}")
        d = dict(d)
        for key in ("grid", "radii"):
            if key in d:
                d[key] = tuple(d[key])
        return cls(**d)
