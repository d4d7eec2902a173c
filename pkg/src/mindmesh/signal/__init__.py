"""EEG preprocessing: band-pass filtering, z-scoring and frame-aligned windows."""

from .filters import FilterDesign, apply_filter, design_bandpass
from .io import read_csv, read_eegb, write_csv, write_eegb
from .preprocess import (
    WINDOW,
    EegWindow,
    NormStats,
    WindowDropWarning,
    apply_zscore,
    fit_norm_stats,
    frame_end_sample,
    segment_windows,
    stack_windows,
)
from .recording import EegRecording

__all__ = [
    "WINDOW", "EegRecording", "EegWindow", "FilterDesign", "NormStats", "WindowDropWarning",
    "apply_filter", "apply_zscore", "design_bandpass", "fit_norm_stats", "frame_end_sample",
    "read_csv", "read_eegb", "segment_windows", "stack_windows", "write_csv", "write_eegb",
]
