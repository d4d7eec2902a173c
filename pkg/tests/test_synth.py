import filecmp
import warnings

import numpy as np
import pytest
from scipy.ndimage import gaussian_filter1d
from scipy.signal import hilbert

from mindmesh.errors import ConfigError
from mindmesh.geometry import sample_vertices, write_obj, write_pmap
from mindmesh.signal import apply_filter, design_bandpass
from mindmesh.synth import (
    SynthConfig,
    base_mesh,
    build_dataset,
    dataset_size_bytes,
    generate_dataset,
    generate_eeg,
    generate_face_sequence,
    latent_trajectory,
    linear_probe_r2,
    load_dataset,
    write_dataset,
)

SMALL = SynthConfig(seed=3, latent_dim=2, trials=2, holdout_trials=1, segments_per_trial=2,
                    duration_per_segment=0.2, grid=(8, 8), resolution=32)


def test_default_counts():
    cfg = SynthConfig()
    ds = generate_dataset(cfg)
    regular = [t for t in ds.trials if t.role == "train"]
    assert len(regular) == 5 and cfg.segments_per_trial == 6
    man = ds.manifest()
    assert [len(t["segments"]) for t in man["trials"]] == [6] * 6
    total_seconds = (cfg.trials + cfg.holdout_trials) * cfg.segments_per_trial * cfg.duration_per_segment
    assert man["frame_count"] == round(cfg.fps * total_seconds) == 1620
    assert sum(len(s["frames"]) for t in man["trials"] for s in t["segments"]) == 1620
    assert man["split"]["holdout"] == ["holdout0"]
    assert 2000 <= ds.template.n_vertices <= 3000


def test_config_validation():
    with pytest.raises(ConfigError):
        SynthConfig(latent_dim=0)
    with pytest.raises(ConfigError):
        SynthConfig(latent_dim=20)          # carriers would leave the pass band
    with pytest.raises(ConfigError):
        SynthConfig(segments_per_trial=1)
    with pytest.raises(ConfigError):
        SynthConfig.from_dict({"nope": 1})
    assert SynthConfig.from_dict(SynthConfig().to_dict()) == SynthConfig()


def test_zero_latents_give_base_mesh():
    cfg = SynthConfig(grid=(20, 20))
    seq = generate_face_sequence(cfg, latents=np.zeros((5, cfg.latent_dim)))
    base = base_mesh(cfg)
    for m in seq.meshes:
        np.testing.assert_array_equal(m.vertices, base.vertices)


def test_latents_move_the_face():
    cfg = SynthConfig(grid=(20, 20))
    seq = generate_face_sequence(cfg)
    assert np.abs(seq.meshes[0].vertices - seq.meshes[10].vertices).max() > 0
    assert seq.latents.shape == (cfg.frames_per_trial, cfg.latent_dim)


def test_maps_sample_back_to_meshes():
    cfg = SynthConfig()
    seq = generate_face_sequence(cfg)
    rows, cols = cfg.grid
    interior = np.arange(rows * cols).reshape(rows, cols)[1:-1, 1:-1].ravel()
    for k in (0, 40, 200):
        mesh = seq.meshes[k]
        got = sample_vertices(seq.maps[k], mesh).vertices
        err = np.sqrt(np.mean(np.sum((got[interior] - mesh.vertices[interior]) ** 2, axis=1)))
        assert err < 1e-3 * mesh.bbox_diagonal()


def test_zero_latents_pure_noise_and_noise_independent_of_latents():
    cfg = SynthConfig()
    rng = np.random.default_rng(0)
    lat = rng.normal(size=(300, cfg.latent_dim))
    zero = np.zeros_like(lat)
    assert np.all(generate_eeg(zero, cfg, snr_db=np.inf).samples == 0)
    noise = generate_eeg(zero, cfg).samples.astype(np.float64)
    assert noise.std() > 0
    mixed = generate_eeg(lat, cfg).samples.astype(np.float64)
    clean = generate_eeg(lat, cfg, snr_db=np.inf).samples.astype(np.float64)
    np.testing.assert_allclose(mixed - clean, noise, atol=1e-4)


def test_noise_free_envelope_tracks_latent():
    cfg = SynthConfig(latent_dim=1, seed=5)
    rng = np.random.default_rng(1)
    lat = latent_trajectory(cfg, rng, 900)
    rec = generate_eeg(lat, cfg, snr_db=np.inf)
    wide = apply_filter(rec, design_bandpass(cfg.sample_rate, 4.0, 40.0, 6))
    t = np.arange(rec.n_samples) / cfg.sample_rate
    e = np.interp(t, np.arange(900) / cfg.fps, lat[:, 0])
    for j, target in ((0, np.maximum(e, 0)), (1, np.maximum(-e, 0))):
        f = cfg.carrier_frequencies[j]
        narrow = apply_filter(wide, design_bandpass(cfg.sample_rate, f - 0.7, f + 0.7, 3))
        env = np.abs(hilbert(narrow.samples[:, 0].astype(np.float64)))
        core = slice(250, -250)
        rho = np.corrcoef(env[core], target[core])[0, 1]
        assert abs(rho) > 0.9


def test_injected_energy_inside_band():
    cfg = SynthConfig()
    lat = np.random.default_rng(2).normal(size=(600, cfg.latent_dim))
    lat = gaussian_filter1d(lat, 15, axis=0)
    x = generate_eeg(lat, cfg, snr_db=np.inf).samples.astype(np.float64)
    p = np.abs(np.fft.rfft(x * np.hanning(len(x))[:, None], axis=0)) ** 2
    f = np.fft.rfftfreq(len(x), 1 / cfg.sample_rate)
    outside = p[(f < 4) | (f > 40)].sum()
    assert outside < 1e-3 * p.sum()


def test_seed_determinism():
    a = generate_eeg(np.ones((60, 8)), SynthConfig(seed=9), trial=2)
    b = generate_eeg(np.ones((60, 8)), SynthConfig(seed=9), trial=2)
    assert a.samples.tobytes() == b.samples.tobytes()
    c = generate_eeg(np.ones((60, 8)), SynthConfig(seed=10), trial=2)
    assert a.samples.tobytes() != c.samples.tobytes()


def test_every_frame_has_a_window():
    ds = generate_dataset(SynthConfig())
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        for entry, t in zip(ds.manifest()["trials"], ds.trials):
            for seg in entry["segments"]:
                for fr in seg["frames"]:
                    s, e = fr["eeg_span"]
                    assert s >= 0 and e <= t.recording.n_samples and e - s == 375


def _tree_equal(a, b):
    cmp = filecmp.dircmp(a, b)
    assert not cmp.left_only and not cmp.right_only and not cmp.diff_files
    _, mismatch, errors = filecmp.cmpfiles(a, b, cmp.common_files, shallow=False)
    assert not mismatch and not errors
    for sub in cmp.common_dirs:
        _tree_equal(a / sub, b / sub)


def test_build_is_deterministic_and_reload_roundtrips(tmp_path):
    build_dataset(SMALL, tmp_path / "a")
    build_dataset(SMALL, tmp_path / "b")
    _tree_equal(tmp_path / "a", tmp_path / "b")
    write_dataset(load_dataset(tmp_path / "a"), tmp_path / "c")
    _tree_equal(tmp_path / "a", tmp_path / "c")
    ds = load_dataset(tmp_path / "a" / "manifest.json")
    assert [t.trial_id for t in ds.trials] == ["trial0", "trial1", "holdout0"]


def test_default_size_under_2gb(tmp_path):
    cfg = SynthConfig()
    seq = generate_face_sequence(cfg, latents=np.ones((1, cfg.latent_dim)) * 2.5)
    write_pmap(tmp_path / "f.pmap", seq.maps[0])
    write_obj(tmp_path / "f.obj", seq.meshes[0])
    per_frame = (tmp_path / "f.pmap").stat().st_size + (tmp_path / "f.obj").stat().st_size
    n_trials = cfg.trials + cfg.holdout_trials
    samples = round((cfg.lead_in + cfg.frames_per_trial / cfg.fps) * cfg.sample_rate)
    eeg = n_trials * (24 + 4 * samples * cfg.channels)
    total = 1620 * per_frame + eeg + dataset_size_bytes(tmp_path)
    assert total < 2 * 1024 ** 3


def test_linear_probe_recovers_latents():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        assert linear_probe_r2(generate_dataset(SynthConfig())) > 0.5
