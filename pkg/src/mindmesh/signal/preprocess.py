"""Per-channel standardisation and frame-aligned windowing."""

from __future__ import annotations

import logging
import math
import warnings
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from ..errors import DataError, DimensionError
from .recording import EegRecording

log = logging.getLogger(__name__)

WINDOW = 375


class WindowDropWarning(UserWarning):
    """A video frame had no complete EEG window and was skipped."""


@dataclass(frozen=True)
class NormStats:
    mean: np.ndarray
    std: np.ndarray
    epsilon: float = 1e-8

    @property
    def channels(self) -> int:
        return len(self.mean)


@dataclass(frozen=True)
class EegWindow:
    """``data`` is ``[W, C]``; ``end_sample`` is exclusive."""

    data: np.ndarray
    frame_index: int
    trial_id: str = ""
    subject_id: str = ""
    end_sample: int = -1

    def as_image(self) -> np.ndarray:
        """The ``1 x C x W`` layout consumed by the encoder."""
        return self.data.T[None]


def _samples(seg) -> np.ndarray:
    return seg.samples if isinstance(seg, EegRecording) else np.asarray(seg)


def fit_norm_stats(train: Sequence[EegRecording | np.ndarray], epsilon: float = 1e-8) -> NormStats:
    """Per-channel mean and population std over the concatenated training samples."""
    if isinstance(train, (EegRecording, np.ndarray)):
        train = [train]
    blocks = [_samples(s) for s in train]
    widths = {b.shape[1] for b in blocks}
    if len(widths) != 1:
        raise DimensionError(f"training segments disagree on channel count: {sorted(widths)}")
    x = np.concatenate(blocks, axis=0).astype(np.float64)
    if x.shape[0] < 2:
        raise DataError(f"need at least 2 samples per channel, got {x.shape[0]}")
    mean = x.mean(axis=0)
    std = np.sqrt(((x - mean) ** 2).mean(axis=0))
    return NormStats(mean.astype(np.float32), std.astype(np.float32), epsilon)


def apply_zscore(recording: EegRecording, stats: NormStats) -> EegRecording:
    """``(x - mean) / (std + eps)`` per channel using the supplied (training) statistics."""
    if recording.channels != stats.channels:
        raise DimensionError(f"recording has {recording.channels} channels, stats have {stats.channels}")
    z = (recording.samples.astype(np.float64) - stats.mean) / (stats.std.astype(np.float64) + stats.epsilon)
    return recording.replace(samples=z.astype(np.float32))


def frame_end_sample(t_frame: float, recording: EegRecording) -> int:
    """Exclusive end index of the window aligned to a frame (round half up)."""
    return int(math.floor((t_frame - recording.start_time) * recording.sample_rate + 0.5))


def segment_windows(recording: EegRecording, frame_times: Sequence[float], window: int = WINDOW,
                    frame_indices: Sequence[int] | None = None, trial_id: str = "",
                    subject_id: str = "") -> list[EegWindow]:
    """One causal window per video frame.

    The window for a frame at time ``t`` holds the ``window`` samples ending
    just before sample ``round(t * fs)``, so no future signal is used.
    Frames without a full window inside the recording are dropped with a
    :class:`WindowDropWarning` each.
    """
    if frame_indices is None:
        frame_indices = range(len(frame_times))
    if len(frame_indices) != len(frame_times):
        raise DimensionError("frame_indices and frame_times differ in length")
    out = []
    dropped = 0
    for idx, t in zip(frame_indices, frame_times):
        end = frame_end_sample(t, recording)
        if end < window or end > recording.n_samples:
            dropped += 1
            warnings.warn(f"frame {idx} at t={t:.4f}s has no complete {window}-sample window; dropped",
                          WindowDropWarning, stacklevel=2)
            continue
        data = np.ascontiguousarray(recording.samples[end - window:end])
        out.append(EegWindow(data, int(idx), trial_id, subject_id, end))
    if dropped:
        log.warning("dropped %d of %d frames without a complete EEG window", dropped, len(frame_times))
    return out


def stack_windows(windows: Sequence[EegWindow]) -> np.ndarray:
    """Batch as ``(B, 1, C, W)`` float32."""
    return np.stack([w.as_image() for w in windows]).astype(np.float32)
