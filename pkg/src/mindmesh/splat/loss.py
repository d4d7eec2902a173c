"""Photometric loss with offset and scale regularisers for splat fitting."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..autodiff import functional as F
from ..autodiff.tensor import Tensor
from ..errors import ConfigError, DimensionError
from .splats import SplatParams
from .ssim import ssim_t


@dataclass(frozen=True)
class SplatLossWeights:
    lam: float = 0.2             # D-SSIM share of the photometric term
    lambda_pos: float = 0.01
    lambda_scale: float = 0.1
    eps_pos: float = 1.0         # face-frame units
    eps_scale: float = 0.6

    def __post_init__(self):
        if not 0.0 <= self.lam <= 1.0:
            raise ConfigError("lam must lie in [0, 1]")
        if self.eps_pos <= 0 or self.eps_scale <= 0:
            raise ConfigError("regulariser thresholds must be positive")

    def to_dict(self) -> dict:
        return dict(self.__dict__)

    @classmethod
    def from_dict(cls, d: dict | None):
        d = dict(d or {})
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown SplatLossWeights settings: {sorted(unknown)}")
        return cls(**d)


@dataclass
class SplatLoss:
    total: Tensor
    l1: float
    d_ssim: float
    pos: float
    scale: float


def splat_loss(rendered: Tensor, target: np.ndarray, params: SplatParams,
               weights: SplatLossWeights = SplatLossWeights()) -> SplatLoss:
    """``(1-lam) L1 + lam D-SSIM + lambda_pos |max(|mu|, eps_pos)| + lambda_scale |max(s, eps_scale)|``.

    The maxima are component-wise and the norms run over all splats, so
    components under their threshold contribute a constant with no gradient.
    """
    target = np.asarray(target, dtype=rendered.dtype)
    if tuple(target.shape) != tuple(rendered.shape):
        raise DimensionError(f"rendered {rendered.shape} and target {target.shape} differ")
    l1 = F.mean(F.abs(rendered - Tensor(target)))
    parts = l1 * (1.0 - weights.lam)
    dssim = None
    if weights.lam > 0:
        dssim = (1.0 - ssim_t(rendered, target)) * 0.5
        parts = parts + dssim * weights.lam
    pos = F.l2norm(F.maximum(F.abs(params.offset), weights.eps_pos))
    scale = F.l2norm(F.maximum(params.scale(), weights.eps_scale))
    total = parts + pos * weights.lambda_pos + scale * weights.lambda_scale
    return SplatLoss(total, float(l1.data), float(dssim.data) if dssim is not None else float("nan"),
                     float(pos.data), float(scale.data))
