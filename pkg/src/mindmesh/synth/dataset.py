"""Assemble trials of paired EEG and face geometry, and store them on disk.

Directory layout written by :func:`build_dataset`::

    manifest.json
    template.obj
    <trial>/eeg.eegb
    <trial>/latents.npy
    <trial>/frame_00000.pmap, frame_00000.obj, ...

Manifest schema::

    {"version": 1, "config": {...}, "frame_count": int, "window": 375,
     "trials": [{"id", "role": "train"|"holdout", "eeg_path", "latents_path",
                 "segments": [{"index", "frames": [{"index", "time", "eeg_span": [start, end],
                                                     "split", "pmap_path", "obj_path"}]}]}],
     "split": {"test_segment": int, "holdout": [trial ids]}}
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import DataError
from ..geometry.mesh import TriMesh, read_obj, write_obj
from ..geometry.posmap import write_pmap
from ..signal.io import read_eegb, write_eegb
from ..signal.preprocess import WINDOW, frame_end_sample
from ..signal.recording import EegRecording
from .config import SynthConfig
from .eeg import generate_eeg
from .face import (
    FrameSequence,
    base_mesh,
    deformation_basis,
    latent_trajectory,
    vertices_from_latents,
)

MANIFEST_VERSION = 1


@dataclass
class TrialData:
    trial_id: str
    role: str                   # "train" or "holdout"
    recording: EegRecording
    frame_times: np.ndarray     # [T] seconds, on the recording clock
    segments: np.ndarray        # [T] segment index of each frame
    latents: np.ndarray         # [T, D]
    vertices: np.ndarray        # [T, V, 3]

    @property
    def n_frames(self) -> int:
        return len(self.frame_times)


@dataclass
class SyntheticDataset:
    config: SynthConfig
    template: TriMesh
    trials: list[TrialData]

    def trial(self, trial_id: str) -> TrialData:
        for t in self.trials:
            if t.trial_id == trial_id:
                return t
        raise KeyError(trial_id)

    @property
    def recordings(self) -> dict[str, EegRecording]:
        return {t.trial_id: t.recording for t in self.trials}

    def meshes(self, trial_id: str) -> FrameSequence:
        return FrameSequence(self.template, self.trial(trial_id).vertices, "mesh")

    def maps(self, trial_id: str) -> FrameSequence:
        return FrameSequence(self.template, self.trial(trial_id).vertices, "map", self.config.resolution)

    @property
    def latents(self) -> dict[str, np.ndarray]:
        return {t.trial_id: t.latents for t in self.trials}

    @property
    def frame_count(self) -> int:
        return sum(t.n_frames for t in self.trials)

    def manifest(self) -> dict:
        cfg = self.config
        out = []
        for t in self.trials:
            segs = []
            for s in range(cfg.segments_per_trial):
                frames = []
                for k in np.flatnonzero(t.segments == s):
                    end = frame_end_sample(float(t.frame_times[k]), t.recording)
                    split = "holdout" if t.role == "holdout" else (
                        "test" if s == cfg.segments_per_trial - 1 else "train")
                    frames.append({"index": int(k), "time": round(float(t.frame_times[k]), 9),
                                   "eeg_span": [end - WINDOW, end], "split": split,
                                   "pmap_path": f"{t.trial_id}/frame_{k:05d}.pmap",
                                   "obj_path": f"{t.trial_id}/frame_{k:05d}.obj"})
                segs.append({"index": s, "frames": frames})
            out.append({"id": t.trial_id, "role": t.role, "eeg_path": f"{t.trial_id}/eeg.eegb",
                        "latents_path": f"{t.trial_id}/latents.npy", "segments": segs})
        return {"version": MANIFEST_VERSION, "config": cfg.to_dict(), "frame_count": self.frame_count,
                "window": WINDOW, "template": "template.obj", "trials": out,
                "split": {"test_segment": cfg.segments_per_trial - 1,
                          "holdout": [t.trial_id for t in self.trials if t.role == "holdout"]}}


def trial_ids(cfg: SynthConfig) -> list[tuple[str, str]]:
    ids = [(f"trial{i}", "train") for i in range(cfg.trials)]
    return ids + [(f"holdout{i}", "holdout") for i in range(cfg.holdout_trials)]


def generate_trial(cfg: SynthConfig, index: int, trial_id: str, role: str,
                   template: TriMesh, basis: np.ndarray) -> TrialData:
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 1, index]))
    lead, n = cfg.lead_in_frames, cfg.frames_per_trial
    full = latent_trajectory(cfg, rng, lead + n)
    n_samples = int(round((lead + n) / cfg.fps * cfg.sample_rate))
    rec = generate_eeg(full, cfg, trial=index, n_samples=n_samples)
    latents = full[lead:]
    times = (lead + np.arange(n)) / cfg.fps
    segments = np.arange(n) // cfg.frames_per_segment
    return TrialData(trial_id, role, rec, times, segments, latents,
                     vertices_from_latents(cfg, latents, template, basis))


def generate_dataset(cfg: SynthConfig) -> SyntheticDataset:
    """Everything in memory; position maps are rasterised on access."""
    template = base_mesh(cfg)
    basis = deformation_basis(cfg, template)
    trials = [generate_trial(cfg, i, tid, role, template, basis) for i, (tid, role) in enumerate(trial_ids(cfg))]
    return SyntheticDataset(cfg, template, trials)


def write_dataset(ds: SyntheticDataset, out_dir) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = ds.manifest()
    write_obj(out / "template.obj", ds.template)
    for t, entry in zip(ds.trials, manifest["trials"]):
        (out / t.trial_id).mkdir(exist_ok=True)
        write_eegb(out / entry["eeg_path"], t.recording)
        np.save(out / entry["latents_path"], t.latents.astype("<f4"))
        maps = ds.maps(t.trial_id)
        meshes = ds.meshes(t.trial_id)
        for seg in entry["segments"]:
            for fr in seg["frames"]:
                write_pmap(out / fr["pmap_path"], maps[fr["index"]])
                write_obj(out / fr["obj_path"], meshes[fr["index"]])
    with open(out / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)
        fh.write("\n")
    return out / "manifest.json"


def build_dataset(cfg: SynthConfig, out_dir) -> Path:
    return write_dataset(generate_dataset(cfg), out_dir)


def load_dataset(path) -> SyntheticDataset:
    """Reload a dataset written by :func:`build_dataset` (directory or manifest path)."""
    path = Path(path)
    root = path.parent if path.is_file() else path
    try:
        with open(root / "manifest.json") as fh:
            manifest = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read manifest in {root}: {exc}") from exc
    if manifest.get("version") != MANIFEST_VERSION:
        raise DataError(f"unsupported manifest version {manifest.get('version')}")
    cfg = SynthConfig.from_dict(manifest["config"])
    template = read_obj(root / manifest["template"])
    trials = []
    for entry in manifest["trials"]:
        rec = read_eegb(root / entry["eeg_path"])
        latents = np.load(root / entry["latents_path"]).astype(np.float32)
        frames = [fr for seg in entry["segments"] for fr in seg["frames"]]
        segs = np.array([seg["index"] for seg in entry["segments"] for _ in seg["frames"]])
        verts = np.stack([read_obj(root / fr["obj_path"]).vertices for fr in frames])
        times = np.array([fr["time"] for fr in frames])
        trials.append(TrialData(entry["id"], entry["role"], rec, times, segs, latents, verts))
    return SyntheticDataset(cfg, template, trials)


def dataset_size_bytes(root) -> int:
    return sum(os.path.getsize(os.path.join(d, f)) for d, _, files in os.walk(root) for f in files)
