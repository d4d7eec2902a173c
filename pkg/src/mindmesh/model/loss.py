"""Masked reconstruction loss plus a self-supervised Laplacian smoothness term."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..autodiff import functional as F
from ..autodiff.tensor import Tensor, make_result
from ..errors import ContractError, DimensionError
from ..geometry.posmap import neighbour_weights
from .config import LossWeights

# np.roll shift and axis of the neighbour each entry of ``neighbour_weights`` refers to
_SHIFTS = ((1, -2), (-1, -2), (1, -1), (-1, -1))


def _valid_masks(mask: np.ndarray, interior: bool) -> tuple[list[np.ndarray], np.ndarray]:
    """Per-direction validity and centre masks broadcastable to ``(B, 1, H, W)``."""
    m = np.asarray(mask).astype(bool)
    if m.ndim == 2:
        m = m[None]
    per = [neighbour_weights(mi) for mi in m]
    valid = [np.stack([p[d][0] for p in per])[:, None] for d in range(4)]
    centre = m[:, None]
    if interior:
        centre = centre & valid[0] & valid[1] & valid[2] & valid[3]
    return valid, centre


def masked_laplacian(x: Tensor, mask: np.ndarray, interior: bool = False) -> Tensor:
    """Neumann 4-neighbour Laplacian of ``(B, C, H, W)`` maps, zero off the mask.

    With ``interior`` the output is also zeroed on texels that have a
    neighbour outside the mask, so linear ramps map to exactly zero.
    """
    if x.ndim != 4:
        raise DimensionError(f"masked_laplacian expects (B, C, H, W), got {x.shape}")
    valid, centre = _valid_masks(mask, interior)
    out = np.zeros_like(x.data)
    for v, (shift, axis) in zip(valid, _SHIFTS):
        out += np.where(v, np.roll(x.data, shift, axis=axis) - x.data, 0)
    out *= centre

    def backward(g):
        gc = g * centre
        gx = np.zeros_like(g)
        for v, (shift, axis) in zip(valid, _SHIFTS):
            h = np.where(v, gc, 0)
            gx += np.roll(h, -shift, axis=axis) - h
        return (gx,)

    return make_result(out, (x,), backward)


def plane_norms(x: Tensor) -> Tensor:
    """Euclidean norm of each ``(H, W)`` plane of ``(B, C, H, W)``; zero subgradient at zero."""
    n = np.sqrt(np.sum(x.data * x.data, axis=(2, 3)))

    def backward(g):
        scale = np.divide(g, n, out=np.zeros_like(n), where=n > 0)
        return (x.data * scale[:, :, None, None],)

    return make_result(n.astype(x.dtype, copy=False), (x,), backward)


@dataclass
class LossResult:
    total: Tensor
    rec: float
    smooth: float


def position_map_loss(pred: Tensor, target: np.ndarray, mask: np.ndarray,
                      weights: LossWeights = LossWeights(), interior: bool = True) -> LossResult:
    """Batch mean of ``lambda_rec * L_rec + lambda_smooth * L_smooth``.

    ``L_rec = |m * (pred - target)|^2 / (3HW)`` and
    ``L_smooth = sum_c |m' * lap(pred_c)|_2 / (3HW)``; the smoothness term
    sees only the prediction.  ``m'`` is the mask eroded by one texel when
    ``interior`` is set (the default), otherwise the mask itself.
    """
    if pred.ndim != 4 or tuple(target.shape) != tuple(pred.shape):
        raise DimensionError(f"prediction {pred.shape} and target {target.shape} must match")
    b, c, h, w = pred.shape
    m = np.asarray(mask).astype(bool)
    if m.ndim == 2:
        m = np.broadcast_to(m, (b, h, w))
    if not m.any(axis=(1, 2)).all():
        raise ContractError("a target in the batch has an empty mask")
    norm = 1.0 / (c * h * w * b)
    mf = m[:, None].astype(pred.dtype)
    diff = (pred - Tensor(target.astype(pred.dtype))) * Tensor(mf)
    rec = F.sum(diff * diff) * norm
    smooth = F.sum(plane_norms(masked_laplacian(pred, m, interior))) * norm
    total = rec * weights.lambda_rec + smooth * weights.lambda_smooth
    return LossResult(total, float(rec.data), float(smooth.data))
