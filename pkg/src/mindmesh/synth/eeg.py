"""Synthetic EEG in which each latent dimension amplitude-modulates two carriers.

Dimension ``d`` drives carrier ``2d`` with ``max(e_d, 0)`` and carrier
``2d + 1`` with ``max(-e_d, 0)``, so both the size and the sign of the
latent can be read back from band power. Carriers sit well inside the
4-40 Hz analysis band; pink noise sets the signal-to-noise ratio.
"""

from __future__ import annotations

import numpy as np

from ..signal.recording import EegRecording
from .config import SynthConfig


def mixing_matrix(cfg: SynthConfig) -> np.ndarray:
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 0, 0]))
    return rng.standard_normal((cfg.channels, 2 * cfg.latent_dim))


def carrier_phases(cfg: SynthConfig) -> np.ndarray:
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 0, 1]))
    return rng.uniform(0, 2 * np.pi, 2 * cfg.latent_dim)


def pink_noise(rng: np.random.Generator, n: int, channels: int) -> np.ndarray:
    """Unit-variance noise with a 1/f power spectrum, one column per channel."""
    spec = np.fft.rfft(rng.standard_normal((n, channels)), axis=0)
    f = np.arange(spec.shape[0], dtype=np.float64)
    f[0] = 1.0
    spec = spec / np.sqrt(f)[:, None]
    spec[0] = 0.0
    x = np.fft.irfft(spec, n=n, axis=0)
    return x / x.std(axis=0)


def envelopes(latents: np.ndarray) -> np.ndarray:
    """``[T, 2D]`` carrier amplitudes from ``[T, D]`` latents."""
    pos = np.maximum(latents, 0.0)
    neg = np.maximum(-latents, 0.0)
    return np.stack([pos, neg], axis=2).reshape(len(latents), -1)


def generate_eeg(latents: np.ndarray, cfg: SynthConfig, trial: int = 0,
                 n_samples: int | None = None, snr_db: float | None = None) -> EegRecording:
    """EEG for a latent trajectory whose row ``k`` is at time ``k / fps``.

    The latents are linearly interpolated to the EEG rate. ``snr_db=inf``
    gives a noise-free recording.
    """
    latents = np.asarray(latents, dtype=np.float64)
    fs = cfg.sample_rate
    if n_samples is None:
        n_samples = int(round(len(latents) / cfg.fps * fs))
    t = np.arange(n_samples) / fs
    t_frames = np.arange(len(latents)) / cfg.fps
    fine = np.column_stack([np.interp(t, t_frames, latents[:, d]) for d in range(latents.shape[1])])
    amp = envelopes(fine)                                             # [N, 2D]
    freqs = np.asarray(cfg.carrier_frequencies)
    carriers = np.sin(2 * np.pi * t[:, None] * freqs + carrier_phases(cfg))
    mix = mixing_matrix(cfg)
    signal = (amp * carriers) @ mix.T                                 # [N, C]

    snr = cfg.noise_snr_db if snr_db is None else snr_db
    if np.isfinite(snr):
        # nominal power for unit-variance latents: E[relu(e)^2] = 1/2, sinusoid mean square = 1/2
        nominal = 0.25 * (mix ** 2).sum(axis=1)
        rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 2, trial]))
        noise = pink_noise(rng, n_samples, cfg.channels) * np.sqrt(nominal / 10 ** (snr / 10))
        signal = signal + noise
    return EegRecording(fs, signal.astype(np.float32))
