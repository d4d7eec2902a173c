"""Masked nMAE and nRMSE over a sequence of position maps.

Both errors are divided by the span (max minus min) of the ground-truth
values inside the mask, taken jointly over all channels and all frames of
the evaluated sequence.
"""

from __future__ import annotations

from collections.abc import Sequence
from typing import NamedTuple

import numpy as np

from ..errors import ContractError, DegenerateSequenceError, DimensionError
from ..geometry.posmap import PositionMap


class SequenceErrors(NamedTuple):
    mae: float
    rmse: float
    value_range: float
    count: int

    @property
    def nmae(self) -> float:
        return self.mae / self.value_range

    @property
    def nrmse(self) -> float:
        return self.rmse / self.value_range


def _as_stack(maps) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(maps, PositionMap):
        maps = [maps]
    data = np.stack([m.data for m in maps]).astype(np.float64)
    mask = np.stack([m.mask for m in maps]).astype(bool)
    return data, mask


def sequence_errors(pred: Sequence[PositionMap] | PositionMap,
                    truth: Sequence[PositionMap] | PositionMap) -> SequenceErrors:
    p, pm = _as_stack(pred)
    t, tm = _as_stack(truth)
    if p.shape != t.shape:
        raise DimensionError(f"prediction {p.shape} and truth {t.shape} differ in shape")
    if not np.array_equal(pm, tm):
        raise ContractError("prediction and truth masks differ")
    if not tm.any():
        raise ContractError("no masked texels to evaluate")
    gt = t[tm]          # [M, 3]
    diff = p[tm] - gt
    value_range = float(gt.max() - gt.min())
    if not value_range > 0:
        raise DegenerateSequenceError("ground truth has zero range over the mask")
    n = diff.size
    mae = float(np.abs(diff).sum() / n)
    rmse = float(np.sqrt((diff * diff).sum() / n))
    return SequenceErrors(mae, rmse, value_range, n)


def nmae(pred, truth) -> float:
    return sequence_errors(pred, truth).nmae


def nrmse(pred, truth) -> float:
    return sequence_errors(pred, truth).nrmse
