"""Linear-probe check that the latents can be read back from filtered EEG windows."""

from __future__ import annotations

import numpy as np

from ..signal.filters import apply_filter, design_bandpass
from ..signal.preprocess import segment_windows
from .dataset import SyntheticDataset


def band_amplitudes(windows: np.ndarray, freqs, sample_rate: float, span: float = 0.625) -> np.ndarray:
    """Carrier amplitudes over the last ``span`` seconds, pooled over channels.

    All carriers are fitted jointly by least squares (a sine and cosine
    column each), which removes the leakage a per-frequency lock-in suffers
    on short spans. ``windows`` is ``[B, W, C]``; the result is ``[B, F]``.
    """
    n = int(round(span * sample_rate))
    tail = windows[:, -n:, :].astype(np.float64)
    t = np.arange(n) / sample_rate
    design = np.column_stack([fn(2 * np.pi * f * t) for f in freqs for fn in (np.sin, np.cos)])
    coef = np.einsum("kn,bnc->bkc", np.linalg.pinv(design), tail)
    coef = coef.reshape(len(windows), len(freqs), 2, -1)
    return np.sqrt((coef ** 2).sum(axis=(2, 3)))


def probe_features(ds: SyntheticDataset, trial_id: str, design=None) -> tuple[np.ndarray, np.ndarray]:
    cfg = ds.config
    design = design or design_bandpass(cfg.sample_rate, 4.0, 40.0, 6)
    trial = ds.trial(trial_id)
    rec = apply_filter(trial.recording, design)
    wins = segment_windows(rec, trial.frame_times)
    x = np.stack([w.data for w in wins])
    idx = np.array([w.frame_index for w in wins])
    return band_amplitudes(x, cfg.carrier_frequencies, cfg.sample_rate), trial.latents[idx]


def linear_probe_r2(ds: SyntheticDataset, ridge: float = 1e-3) -> float:
    """Ridge regression from band amplitudes to latents: fit on train trials, score on holdout trials.

    Returns the variance-weighted R^2 across latent dimensions.
    """
    train = [t.trial_id for t in ds.trials if t.role == "train"]
    test = [t.trial_id for t in ds.trials if t.role == "holdout"] or train[-1:]
    if test == train[-1:] and len(train) > 1:
        train = train[:-1]
    xs, ys = zip(*(probe_features(ds, t) for t in train))
    xt, yt = zip(*(probe_features(ds, t) for t in test))
    x, y = np.concatenate(xs), np.concatenate(ys)
    xt, yt = np.concatenate(xt), np.concatenate(yt)
    mu, sd = x.mean(0), x.std(0) + 1e-12
    a = np.column_stack([(x - mu) / sd, np.ones(len(x))])
    at = np.column_stack([(xt - mu) / sd, np.ones(len(xt))])
    w = np.linalg.solve(a.T @ a + ridge * np.eye(a.shape[1]), a.T @ y)
    resid = ((at @ w - yt) ** 2).sum()
    total = ((yt - yt.mean(0)) ** 2).sum()
    return float(1 - resid / total)
