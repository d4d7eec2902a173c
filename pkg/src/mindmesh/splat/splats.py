"""Face-bound Gaussian splats: the plain record, its trainable form, and binding."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..autodiff import functional as F
from ..autodiff import load_checkpoint, save_checkpoint
from ..autodiff.tensor import Tensor
from ..errors import ContractError, DataError, DimensionError
from ..geometry.frames import FaceFrame
from ..geometry.mesh import TriMesh
from .rotation import matrix_to_quat, quat_multiply, quat_to_matrix, quat_to_matrix_t
from .sh import N_COEFFS, SH_C0


@dataclass
class SplatSet:
    """Local splat parameters, one row per splat.

    ``rotation`` holds unit quaternions, ``offset`` and ``scale`` are in
    face-frame units, ``face`` is the index of the bound triangle.
    """

    rotation: np.ndarray   # (N, 4)
    offset: np.ndarray     # (N, 3)
    scale: np.ndarray      # (N, 3)
    opacity: np.ndarray    # (N,)
    sh: np.ndarray         # (N, 16, 3)
    face: np.ndarray       # (N,)

    def __post_init__(self):
        n = len(self.face)
        want = {"rotation": (n, 4), "offset": (n, 3), "scale": (n, 3), "opacity": (n,), "sh": (n, N_COEFFS, 3)}
        for name, shape in want.items():
            if np.shape(getattr(self, name)) != shape:
                raise DimensionError(f"splat {name}: expected {shape}, got {np.shape(getattr(self, name))}")

    def __len__(self):
        return len(self.face)

    def validate(self, tol: float = 1e-6) -> SplatSet:
        if np.any(np.abs(np.linalg.norm(self.rotation, axis=1) - 1.0) > tol):
            raise ContractError("splat quaternions must have unit norm")
        if np.any(self.scale <= 0):
            raise ContractError("splat scales must be positive")
        if np.any((self.opacity < 0) | (self.opacity > 1)):
            raise ContractError("splat opacity must lie in [0, 1]")
        return self

    def copy(self) -> SplatSet:
        return SplatSet(*(np.array(getattr(self, f)) for f in ("rotation", "offset", "scale", "opacity", "sh", "face")))

    def covariance(self) -> np.ndarray:
        """Local covariances ``R diag(s^2) R^T``."""
        r = quat_to_matrix(self.rotation)
        return r @ (self.scale[:, :, None] ** 2 * np.swapaxes(r, 1, 2))


def init_splats(mesh: TriMesh, color=(0.5, 0.5, 0.5), scale: float = 0.5, opacity: float = 0.9) -> SplatSet:
    """One splat per face at the face centre, axis-aligned with the face frame."""
    n = mesh.n_faces
    sh = np.zeros((n, N_COEFFS, 3))
    sh[:, 0] = (np.asarray(color, dtype=np.float64) - 0.5) / SH_C0
    return SplatSet(np.tile([1.0, 0.0, 0.0, 0.0], (n, 1)), np.zeros((n, 3)), np.full((n, 3), scale),
                    np.full(n, opacity), sh, np.arange(n))


@dataclass
class WorldSplats:
    rotation: np.ndarray   # (N, 3, 3)
    center: np.ndarray     # (N, 3)
    scale: np.ndarray      # (N, 3)

    def covariance(self) -> np.ndarray:
        r = self.rotation
        return r @ (self.scale[:, :, None] ** 2 * np.swapaxes(r, 1, 2))


def bind_local_to_global(splats: SplatSet, frames: FaceFrame) -> WorldSplats:
    """``r' = R r``, ``mu' = k R mu + T``, ``s' = k s`` with the frame of each splat's face."""
    R, T, k = frames.R[splats.face], frames.T[splats.face], frames.k[splats.face]
    rot = R @ quat_to_matrix(splats.rotation)
    center = k[:, None] * np.einsum("nij,nj->ni", R, splats.offset) + T
    return WorldSplats(rot, center, k[:, None] * splats.scale)


def bind_quaternion(splats: SplatSet, frames: FaceFrame) -> np.ndarray:
    """World rotations as unit quaternions, via quaternion composition."""
    return quat_multiply(matrix_to_quat(frames.R[splats.face]), splats.rotation)


class SplatParams:
    """Trainable splat parameters on the tape.

    Scale is stored as its logarithm and opacity as a logit so every
    value of the raw parameters maps to a valid splat.
    """

    names = ("rotation", "offset", "log_scale", "opacity_logit", "sh")

    def __init__(self, splats: SplatSet, dtype=np.float64):
        self.face = np.asarray(splats.face)
        o = np.clip(splats.opacity, 1e-6, 1 - 1e-6)
        self.rotation = Tensor(np.array(splats.rotation, dtype=dtype), requires_grad=True)
        self.offset = Tensor(np.array(splats.offset, dtype=dtype), requires_grad=True)
        self.log_scale = Tensor(np.log(splats.scale).astype(dtype), requires_grad=True)
        self.opacity_logit = Tensor(np.log(o / (1 - o)).astype(dtype), requires_grad=True)
        self.sh = Tensor(np.array(splats.sh, dtype=dtype), requires_grad=True)

    def parameters(self) -> dict[str, Tensor]:
        return {n: getattr(self, n) for n in self.names}

    def scale(self) -> Tensor:
        return F.exp(self.log_scale)

    def opacity(self) -> Tensor:
        return F.sigmoid(self.opacity_logit)

    def to_splats(self) -> SplatSet:
        q = self.rotation.data.astype(np.float64)
        return SplatSet(q / np.linalg.norm(q, axis=1, keepdims=True), self.offset.data.astype(np.float64).copy(),
                        np.exp(self.log_scale.data.astype(np.float64)),
                        1 / (1 + np.exp(-self.opacity_logit.data.astype(np.float64))),
                        self.sh.data.astype(np.float64).copy(), self.face.copy())

    def world(self, frames: FaceFrame) -> tuple[Tensor, Tensor, Tensor]:
        """Differentiable binding: world rotation ``(N,3,3)``, centre ``(N,3)`` and scale ``(N,3)``."""
        R = frames.R[self.face].astype(self.offset.dtype)
        T = frames.T[self.face].astype(self.offset.dtype)
        k = frames.k[self.face].astype(self.offset.dtype)[:, None]
        rot = F.matmul(Tensor(R), quat_to_matrix_t(self.rotation))
        local = F.reshape(F.matmul(Tensor(R), F.reshape(self.offset, (-1, 3, 1))), (-1, 3))
        return rot, local * Tensor(k) + Tensor(T), self.scale() * Tensor(k)


def gaussian_eval(x, center, rotation, scale) -> np.ndarray:
    """``exp(-0.5 (x - mu)^T Sigma^-1 (x - mu))`` with ``Sigma = R diag(s^2) R^T``.

    ``rotation`` is a 3x3 matrix or a unit quaternion.
    """
    rot = np.asarray(rotation, dtype=np.float64)
    if rot.shape == (4,):
        rot = quat_to_matrix(rot)
    scale = np.asarray(scale, dtype=np.float64)
    if np.any(scale <= 0):
        raise ContractError("scale must be positive")
    d = (np.asarray(x, dtype=np.float64) - center) @ rot / scale
    return np.exp(-0.5 * np.sum(d * d, axis=-1))


_FIELDS = ("rotation", "offset", "scale", "opacity", "sh", "face")


def save_splats(path, splats: SplatSet) -> None:
    """Store a splat set in the MMCK container, one entry per field."""
    save_checkpoint(path, {f"splat.{f}": getattr(splats, f) for f in _FIELDS})


def load_splats(path) -> SplatSet:
    state = load_checkpoint(path)
    try:
        arrays = [np.asarray(state[f"splat.{f}"], dtype=np.float64) for f in _FIELDS]
    except KeyError as exc:
        raise DataError(f"{path}: missing splat field {exc}") from exc
    arrays[-1] = arrays[-1].astype(np.int64)
    return SplatSet(*arrays)
