"""Pinhole and orthographic cameras looking down their +z axis (x right, y down)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..autodiff import functional as F
from ..autodiff.tensor import Tensor
from ..errors import ConfigError
from ..geometry.kabsch import RigidTransform


@dataclass(frozen=True)
class Camera:
    """``extrinsics`` maps world to camera coordinates.

    Pixel ``(row i, col j)`` has its centre at image coordinates
    ``(u, v) = (j + 0.5, i + 0.5)``.  With ``ortho_scale`` set the camera
    is orthographic and ``fx``/``fy`` are ignored.
    """

    extrinsics: RigidTransform
    fx: float
    fy: float
    cx: float
    cy: float
    height: int
    width: int
    ortho_scale: float | None = None
    near: float = 1e-3

    def __post_init__(self):
        if self.height < 1 or self.width < 1:
            raise ConfigError("camera resolution must be positive")
        if self.ortho_scale is None and (self.fx <= 0 or self.fy <= 0):
            raise ConfigError("focal lengths must be positive")
        if self.ortho_scale is not None and self.ortho_scale <= 0:
            raise ConfigError("orthographic scale must be positive")

    @property
    def position(self) -> np.ndarray:
        """Camera centre in world coordinates."""
        return -self.extrinsics.rotation.T @ self.extrinsics.translation

    def moved(self, motion: RigidTransform) -> Camera:
        """The same camera after the world has been moved by ``motion``."""
        ext = self.extrinsics.compose(motion.inverse())
        return Camera(ext, self.fx, self.fy, self.cx, self.cy, self.height, self.width, self.ortho_scale, self.near)

    def to_camera(self, points: np.ndarray) -> np.ndarray:
        return self.extrinsics.apply(points)

    def project(self, points: np.ndarray) -> np.ndarray:
        """World points to ``(u, v)`` image coordinates."""
        p = self.to_camera(points)
        if self.ortho_scale is not None:
            return p[:, :2] * self.ortho_scale + np.array([self.cx, self.cy])
        return np.stack([self.fx * p[:, 0] / p[:, 2] + self.cx, self.fy * p[:, 1] / p[:, 2] + self.cy], axis=1)

    def project_t(self, centers: Tensor, cov: Tensor) -> tuple[Tensor, Tensor, Tensor]:
        """Differentiable projection of centres ``(N,3)`` and covariances ``(N,3,3)``.

        Returns image means ``(N, 2)``, 2-d covariances ``(N, 2, 2)`` from the
        local affine approximation, and camera-space depths ``(N,)``.
        """
        dt = centers.dtype
        W = Tensor(self.extrinsics.rotation.astype(dt))
        pc = F.matmul(centers, F.transpose(W, (1, 0))) + Tensor(self.extrinsics.translation.astype(dt))
        x, y, z = (F.getitem(pc, (slice(None), i)) for i in range(3))
        cov_c = F.matmul(F.matmul(W, cov), F.transpose(W, (1, 0)))
        n = centers.shape[0]
        if self.ortho_scale is not None:
            s = self.ortho_scale
            mean = F.stack([x * s + self.cx, y * s + self.cy], axis=1)
            J = Tensor(np.broadcast_to(np.array([[s, 0, 0], [0, s, 0]], dtype=dt), (n, 2, 3)).copy())
        else:
            iz = 1.0 / z
            mean = F.stack([x * iz * self.fx + self.cx, y * iz * self.fy + self.cy], axis=1)
            zero = Tensor(np.zeros(n, dtype=dt))
            J = F.reshape(F.stack([iz * self.fx, zero, -x * iz * iz * self.fx,
                                   zero, iz * self.fy, -y * iz * iz * self.fy], axis=1), (n, 2, 3))
        cov2 = F.matmul(F.matmul(J, cov_c), F.transpose(J, (0, 2, 1)))
        return mean, cov2, z


def look_at(eye, target, up=(0.0, 1.0, 0.0), fov_deg: float = 40.0, size: tuple[int, int] = (64, 64),
            ortho_scale: float | None = None) -> Camera:
    """Camera at ``eye`` looking at ``target``; ``up`` is the world direction shown towards the top row."""
    eye, target, up = (np.asarray(v, dtype=np.float64) for v in (eye, target, up))
    z = target - eye
    z /= np.linalg.norm(z)
    y = -(up - (up @ z) * z)
    if np.linalg.norm(y) < 1e-12:
        raise ConfigError("up vector is parallel to the viewing direction")
    y /= np.linalg.norm(y)
    x = np.cross(y, z)
    rot = np.stack([x, y, z])
    h, w = size
    f = 0.5 * h / np.tan(np.radians(fov_deg) / 2)
    return Camera(RigidTransform(rot, -rot @ eye), f, f, w / 2, h / 2, h, w, ortho_scale)
