"""Synthetic paired EEG and face-geometry sequences with a known latent link."""

from .config import SynthConfig
from .dataset import (
    SyntheticDataset,
    TrialData,
    build_dataset,
    dataset_size_bytes,
    generate_dataset,
    load_dataset,
    write_dataset,
)
from .eeg import envelopes, generate_eeg, mixing_matrix, pink_noise
from .face import (
    FaceSequence,
    FrameSequence,
    base_mesh,
    deformation_basis,
    generate_face_sequence,
    latent_trajectory,
)
from .probe import band_amplitudes, linear_probe_r2

__all__ = [
    "FaceSequence", "FrameSequence", "SynthConfig", "SyntheticDataset", "TrialData", "band_amplitudes",
    "base_mesh", "build_dataset", "dataset_size_bytes", "deformation_basis", "envelopes",
    "generate_dataset", "generate_eeg", "generate_face_sequence", "latent_trajectory", "linear_probe_r2",
    "load_dataset", "mixing_matrix", "pink_noise", "write_dataset",
]
