"""Mesh-bound Gaussian splats: binding, projection, compositing, losses and fitting."""

from .blend import collapse, gaussian_pyramid, laplacian_pyramid, pyramid_blend
from .camera import Camera, look_at
from .image import read_img, read_png, write_img, write_png
from .loss import SplatLoss, SplatLossWeights, splat_loss
from .optimize import LEARNING_RATES, FitResult, Triplet, optimize_splats
from .render import ALPHA_MAX, T_MIN, RenderResult, rasterize, render, render_params
from .rotation import matrix_to_quat, quat_multiply, quat_normalize, quat_to_matrix
from .scenes import TRIANGLE, flat_triangle_image, subdivide, triangle_mesh
from .sh import N_COEFFS, SH_C0, sh_basis, sh_color
from .splats import (
    SplatParams,
    SplatSet,
    WorldSplats,
    bind_local_to_global,
    bind_quaternion,
    gaussian_eval,
    init_splats,
    load_splats,
    save_splats,
)
from .ssim import d_ssim, gaussian_window, ssim, ssim_t

__all__ = [
    "ALPHA_MAX", "Camera", "TRIANGLE", "FitResult", "LEARNING_RATES", "N_COEFFS", "RenderResult", "SH_C0", "SplatLoss",
    "SplatLossWeights", "SplatParams", "SplatSet", "T_MIN", "Triplet", "WorldSplats", "bind_local_to_global",
    "bind_quaternion", "collapse", "d_ssim", "flat_triangle_image", "gaussian_eval", "gaussian_pyramid", "gaussian_window",
    "init_splats", "laplacian_pyramid", "load_splats", "look_at", "matrix_to_quat", "optimize_splats", "pyramid_blend",
    "quat_multiply", "quat_normalize", "quat_to_matrix", "rasterize", "read_img", "read_png", "render",
    "render_params", "save_splats", "sh_basis", "sh_color", "splat_loss", "ssim", "ssim_t", "subdivide", "triangle_mesh", "write_img", "write_png",
]
