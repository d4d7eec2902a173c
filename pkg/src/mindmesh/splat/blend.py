"""Laplacian-pyramid blending of a refined image into a base image under a soft mask."""

from __future__ import annotations

import numpy as np
from scipy.ndimage import convolve1d

from ..errors import DimensionError

LEVELS = 5
_KERNEL = np.array([1.0, 4.0, 6.0, 4.0, 1.0]) / 16.0


def _blur(x: np.ndarray) -> np.ndarray:
    return convolve1d(convolve1d(x, _KERNEL, axis=0, mode="reflect"), _KERNEL, axis=1, mode="reflect")


def _down(x: np.ndarray) -> np.ndarray:
    return _blur(x)[::2, ::2]


def _up(x: np.ndarray, shape) -> np.ndarray:
    out = np.zeros(tuple(shape[:2]) + x.shape[2:], dtype=x.dtype)
    out[::2, ::2] = x
    return 4.0 * _blur(out)


def gaussian_pyramid(x: np.ndarray, levels: int = LEVELS) -> list[np.ndarray]:
    pyr = [np.asarray(x, dtype=np.float64)]
    for _ in range(levels - 1):
        pyr.append(_down(pyr[-1]))
    return pyr


def laplacian_pyramid(x: np.ndarray, levels: int = LEVELS) -> list[np.ndarray]:
    g = gaussian_pyramid(x, levels)
    return [g[i] - _up(g[i + 1], g[i].shape) for i in range(levels - 1)] + [g[-1]]


def collapse(pyr: list[np.ndarray]) -> np.ndarray:
    out = pyr[-1]
    for lap in reversed(pyr[:-1]):
        out = lap + _up(out, lap.shape)
    return out


def pyramid_blend(base: np.ndarray, refined: np.ndarray, mask: np.ndarray, levels: int = LEVELS) -> np.ndarray:
    """Per-level ``m * refined + (1 - m) * base`` with the mask's Gaussian pyramid."""
    base = np.asarray(base, dtype=np.float64)
    refined = np.asarray(refined, dtype=np.float64)
    mask = np.asarray(mask, dtype=np.float64)
    if base.shape != refined.shape or mask.shape[:2] != base.shape[:2]:
        raise DimensionError(f"blend inputs differ: {base.shape}, {refined.shape}, mask {mask.shape}")
    if base.ndim == 3 and mask.ndim == 2:
        mask = mask[..., None]
    lb, lr = laplacian_pyramid(base, levels), laplacian_pyramid(refined, levels)
    gm = gaussian_pyramid(mask, levels)
    return collapse([m * r + (1 - m) * b for b, r, m in zip(lb, lr, gm)])
