"""Structural similarity with an 11x11 Gaussian window, on the tape and in numpy."""

from __future__ import annotations

import numpy as np

from ..autodiff import functional as F
from ..autodiff.tensor import Tensor
from ..errors import DimensionError

WINDOW = 11
SIGMA = 1.5
C1 = 0.01 ** 2
C2 = 0.03 ** 2


def gaussian_window(size: int = WINDOW, sigma: float = SIGMA) -> np.ndarray:
    x = np.arange(size) - (size - 1) / 2
    g = np.exp(-x * x / (2 * sigma * sigma))
    return g / g.sum()


def _blur(x: Tensor, g: np.ndarray) -> Tensor:
    """Separable valid filtering of ``(C, 1, H, W)``."""
    kv = Tensor(g.reshape(1, 1, -1, 1).astype(x.dtype))
    kh = Tensor(g.reshape(1, 1, 1, -1).astype(x.dtype))
    return F.conv2d(F.conv2d(x, kv), kh)


def ssim_t(a: Tensor, b: Tensor | np.ndarray) -> Tensor:
    """Mean SSIM of ``(H, W, C)`` images over all valid window positions and channels."""
    b = b if isinstance(b, Tensor) else Tensor(np.asarray(b, dtype=a.dtype))
    if a.shape != b.shape or a.ndim != 3:
        raise DimensionError(f"ssim needs equal (H, W, C) images, got {a.shape} and {b.shape}")
    if min(a.shape[:2]) < WINDOW:
        raise DimensionError(f"images must be at least {WINDOW}x{WINDOW} for SSIM")
    g = gaussian_window()
    x = F.reshape(F.transpose(a, (2, 0, 1)), (a.shape[2], 1) + a.shape[:2])
    y = F.reshape(F.transpose(b, (2, 0, 1)), (b.shape[2], 1) + b.shape[:2])
    mx, my = _blur(x, g), _blur(y, g)
    sxx = _blur(x * x, g) - mx * mx
    syy = _blur(y * y, g) - my * my
    sxy = _blur(x * y, g) - mx * my
    num = (2 * mx * my + C1) * (2 * sxy + C2)
    den = (mx * mx + my * my + C1) * (sxx + syy + C2)
    return F.mean(num / den)


def ssim(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a, dtype=np.float64)
    if a.ndim == 2:
        a, b = a[..., None], np.asarray(b)[..., None]
    return float(ssim_t(Tensor(a), np.asarray(b, dtype=np.float64)).data)


def d_ssim(a: np.ndarray, b: np.ndarray) -> float:
    return (1.0 - ssim(a, b)) / 2.0
