"""Real spherical harmonics up to degree 3 and view-dependent splat colour."""

from __future__ import annotations

import numpy as np

from ..autodiff import functional as F
from ..autodiff.tensor import Tensor

SH_C0 = 0.28209479177387814
SH_C1 = 0.4886025119029199
SH_C2 = (1.0925484305920792, -1.0925484305920792, 0.31539156525252005, -1.0925484305920792, 0.5462742152960396)
SH_C3 = (-0.5900435899266435, 2.890611442640554, -0.4570457994644658, 0.3731763325901154,
         -0.4570457994644658, 1.445305721320277, -0.5900435899266435)
N_COEFFS = 16
DEGREE_OF = np.array([0] + [1] * 3 + [2] * 5 + [3] * 7)


def _basis_terms(x, y, z, one):
    xx, yy, zz = x * x, y * y, z * z
    return [
        one * SH_C0,
        -SH_C1 * y, SH_C1 * z, -SH_C1 * x,
        SH_C2[0] * x * y, SH_C2[1] * y * z, SH_C2[2] * (2 * zz - xx - yy), SH_C2[3] * x * z,
        SH_C2[4] * (xx - yy),
        SH_C3[0] * y * (3 * xx - yy), SH_C3[1] * x * y * z, SH_C3[2] * y * (4 * zz - xx - yy),
        SH_C3[3] * z * (2 * zz - 3 * xx - 3 * yy), SH_C3[4] * x * (4 * zz - xx - yy),
        SH_C3[5] * z * (xx - yy), SH_C3[6] * x * (xx - 3 * yy),
    ]


def sh_basis(dirs: np.ndarray) -> np.ndarray:
    """``(..., 3)`` unit directions to ``(..., 16)`` basis values."""
    d = np.asarray(dirs, dtype=np.float64)
    x, y, z = d[..., 0], d[..., 1], d[..., 2]
    return np.stack(_basis_terms(x, y, z, np.ones_like(x)), axis=-1)


def sh_color(coeffs: np.ndarray, view_dir: np.ndarray) -> np.ndarray:
    """RGB of ``(..., 16, 3)`` coefficients seen along ``view_dir``, offset by 0.5 and clamped to [0, 1]."""
    basis = sh_basis(view_dir)
    rgb = np.einsum("...k,...kc->...c", basis, np.asarray(coeffs, dtype=np.float64)) + 0.5
    return np.clip(rgb, 0.0, 1.0)


def sh_color_t(coeffs: Tensor, dirs: Tensor) -> Tensor:
    """Differentiable ``(N, 16, 3), (N, 3) -> (N, 3)``; zero gradient where clamped."""
    x, y, z = (F.getitem(dirs, (slice(None), i)) for i in range(3))
    one = Tensor(np.ones(dirs.shape[0], dtype=dirs.dtype))
    basis = F.stack(_basis_terms(x, y, z, one), axis=1)
    rgb = F.sum(F.reshape(basis, basis.shape + (1,)) * coeffs, axis=1) + 0.5
    return -F.maximum(-F.maximum(rgb, 0.0), -1.0)
