from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from ..errors import DataError, DimensionError


@dataclass(frozen=True)
class EegRecording:
    """Multi-channel EEG: ``samples`` is ``[T, C]`` float32."""

    sample_rate: float
    samples: np.ndarray
    start_time: float = 0.0

    def __post_init__(self):
        if not self.sample_rate > 0:
            raise DataError(f"sample rate must be positive, got {self.sample_rate}")
        if np.ndim(self.samples) != 2:
            raise DimensionError(f"samples must be [T, C], got shape {np.shape(self.samples)}")

    @property
    def channels(self) -> int:
        return self.samples.shape[1]

    @property
    def n_samples(self) -> int:
        return self.samples.shape[0]

    @property
    def duration(self) -> float:
        return self.n_samples / self.sample_rate

    def check_finite(self):
        bad = ~np.isfinite(self.samples)
        if bad.any():
            idx, ch = np.argwhere(bad)[0]
            raise DataError(f"non-finite sample in channel {ch} at index {idx}")

    def replace(self, **changes) -> EegRecording:
        return dataclasses.replace(self, **changes)
