"""Turn a synthetic (or reloaded) dataset into normalised window/target examples."""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from ..errors import ContractError
from ..geometry.mesh import TriMesh
from ..geometry.posmap import PositionMap, RasterPlan, raster_plan_for
from ..signal.filters import FilterDesign, apply_filter, design_bandpass
from ..signal.preprocess import (
    WINDOW,
    NormStats,
    apply_zscore,
    fit_norm_stats,
    segment_windows,
    stack_windows,
)


@dataclass
class TrialExamples:
    trial_id: str
    role: str
    windows: np.ndarray        # (T, 1, C, W) float32
    frame_index: np.ndarray    # (T,)
    segment: np.ndarray        # (T,)
    vertices: np.ndarray       # (T, V, 3) ground-truth geometry

    def __len__(self):
        return len(self.frame_index)


@dataclass
class PreparedData:
    template: TriMesh
    plan: RasterPlan
    trials: list[TrialExamples]
    norm: NormStats
    segments_per_trial: int

    @property
    def mask(self) -> np.ndarray:
        return self.plan.mask

    def trial(self, trial_id: str) -> TrialExamples:
        for t in self.trials:
            if t.trial_id == trial_id:
                return t
        raise KeyError(trial_id)

    def targets(self, trial: TrialExamples, idx) -> np.ndarray:
        """Ground-truth maps ``(B, 3, H, W)`` for the given example indices."""
        return np.stack([self.plan.apply(trial.vertices[i], self.template.faces).transpose(2, 0, 1)
                         for i in np.atleast_1d(idx)])

    def target_maps(self, trial: TrialExamples, idx) -> list[PositionMap]:
        mask = self.mask
        return [PositionMap(self.plan.apply(trial.vertices[i], self.template.faces), mask)
                for i in np.atleast_1d(idx)]


@dataclass
class Splits:
    train: list[tuple[int, int]]          # (trial position, example index)
    test: dict[str, np.ndarray]
    holdout: dict[str, np.ndarray]

    @property
    def test_fraction(self) -> float:
        n_test = sum(len(v) for v in self.test.values())
        return n_test / (n_test + len(self.train))


def prepare(dataset, design: FilterDesign | None = None, zero_phase: bool = True,
            holdout: Sequence[str] = (), window: int = WINDOW) -> PreparedData:
    """Filter, z-score with training statistics, and cut one window per frame.

    Statistics come from the samples under training windows of the
    non-holdout trials only.
    """
    cfg = dataset.config
    design = design or design_bandpass(cfg.sample_rate, 4.0, 40.0, 6)
    holdout = set(holdout) or {t.trial_id for t in dataset.trials if t.role == "holdout"}
    last_seg = cfg.segments_per_trial - 1
    filtered = {t.trial_id: apply_filter(t.recording, design, zero_phase) for t in dataset.trials}

    stats_blocks = []
    for t in dataset.trials:
        if t.trial_id in holdout:
            continue
        train_times = t.frame_times[t.segments < last_seg]
        if len(train_times):
            end = int(np.floor((train_times.max() - t.recording.start_time) * t.recording.sample_rate + 0.5))
            stats_blocks.append(filtered[t.trial_id].samples[:end])
    if not stats_blocks:
        raise ContractError("no training trials to fit normalisation statistics")
    norm = fit_norm_stats(stats_blocks)

    trials = []
    for t in dataset.trials:
        rec = apply_zscore(filtered[t.trial_id], norm)
        wins = segment_windows(rec, t.frame_times, window=window, trial_id=t.trial_id)
        idx = np.array([w.frame_index for w in wins], dtype=np.int64)
        role = "holdout" if t.trial_id in holdout else "train"
        trials.append(TrialExamples(t.trial_id, role, stack_windows(wins), idx, t.segments[idx], t.vertices[idx]))
    plan = raster_plan_for(dataset.template, cfg.resolution)
    return PreparedData(dataset.template, plan, trials, norm, cfg.segments_per_trial)


def make_splits(data: PreparedData) -> Splits:
    """Final segment of each regular trial is test, the rest train; holdout trials are test-only."""
    if data.segments_per_trial < 2:
        raise ContractError("every trial needs at least 2 segments")
    last = data.segments_per_trial - 1
    train, test, held = [], {}, {}
    for pos, t in enumerate(data.trials):
        if t.role == "holdout":
            held[t.trial_id] = np.arange(len(t))
            continue
        is_test = t.segment == last
        test[t.trial_id] = np.flatnonzero(is_test)
        train.extend((pos, int(i)) for i in np.flatnonzero(~is_test))
    return Splits(train, test, held)
