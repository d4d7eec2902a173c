"""Per-triangle local frames used to attach splats to a mesh."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DegenerateGeometryError
from .mesh import TriMesh


@dataclass(frozen=True)
class FaceFrame:
    R: np.ndarray
    T: np.ndarray
    k: float


def face_frames(vertices: np.ndarray, faces: np.ndarray, min_area: float = 1e-12):
    """Vectorised frames: rotations ``[F, 3, 3]``, centroids ``[F, 3]``, scales ``[F]``.

    Columns of each rotation are the unit first edge, ``normal x edge`` and
    the unit normal; the scale is ``sqrt(2 * area)``.
    """
    v = np.asarray(vertices, dtype=np.float64)
    a, b, c = v[faces[:, 0]], v[faces[:, 1]], v[faces[:, 2]]
    e1 = b - a
    cross = np.cross(e1, c - a)
    twice_area = np.linalg.norm(cross, axis=1)
    bad = np.flatnonzero(0.5 * twice_area <= min_area)
    if bad.size:
        raise DegenerateGeometryError(f"face {bad[0]} is degenerate")
    n = cross / twice_area[:, None]
    e1 = e1 / np.linalg.norm(e1, axis=1, keepdims=True)
    e2 = np.cross(n, e1)
    rot = np.stack([e1, e2, n], axis=2)
    return rot, (a + b + c) / 3.0, np.sqrt(twice_area)


def face_frame(mesh: TriMesh, face_index: int) -> FaceFrame:
    rot, cen, k = face_frames(mesh.vertices, mesh.faces[[face_index]])
    return FaceFrame(rot[0], cen[0], float(k[0]))
