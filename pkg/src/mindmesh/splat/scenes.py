"""Small reference scenes: a flat triangle, its subdivisions and an exact coverage render."""

from __future__ import annotations

import numpy as np

from ..geometry.mesh import TriMesh
from .camera import Camera

TRIANGLE = np.array([[-1.0, -0.8, 0.0], [1.0, -0.8, 0.0], [0.0, 1.0, 0.0]])


def subdivide(vertices: np.ndarray, faces: np.ndarray, levels: int) -> tuple[np.ndarray, np.ndarray]:
    """Midpoint (1-to-4) subdivision, ``levels`` times, sharing edge midpoints."""
    v = [np.asarray(p, dtype=np.float64) for p in vertices]
    f = np.asarray(faces)
    for _ in range(levels):
        mids: dict[tuple[int, int], int] = {}

        def mid(a, b):
            key = (min(a, b), max(a, b))
            if key not in mids:
                mids[key] = len(v)
                v.append((v[a] + v[b]) / 2)
            return mids[key]

        out = []
        for a, b, c in f:
            ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
            out += [[a, ab, ca], [ab, b, bc], [ca, bc, c], [ab, bc, ca]]
        f = np.array(out)
    return np.array(v), f


def triangle_mesh(levels: int = 0, vertices: np.ndarray = TRIANGLE) -> TriMesh:
    v, f = subdivide(vertices, np.array([[0, 1, 2]]), levels)
    lo, hi = v[:, :2].min(axis=0), v[:, :2].max(axis=0)
    uv = 0.05 + 0.9 * (v[:, :2] - lo) / (hi - lo)
    return TriMesh(v, f, uv, f)


def flat_triangle_image(mesh: TriMesh, camera: Camera, color, supersample: int = 4,
                        background=(1.0, 1.0, 1.0)) -> np.ndarray:
    """Area-averaged coverage image of the mesh's triangles in one flat colour."""
    h, w = camera.height, camera.width
    ys, xs = np.mgrid[0:h, 0:w].astype(np.float64)
    offsets = (np.arange(supersample) + 0.5) / supersample
    covered = np.zeros((h, w))
    proj = camera.project(mesh.vertices)
    for dy in offsets:
        for dx in offsets:
            x, y = xs + dx, ys + dy
            hit = np.zeros((h, w), dtype=bool)
            for tri in mesh.faces:
                a, b, c = proj[tri]
                e = [(q[0] - p[0]) * (y - p[1]) - (q[1] - p[1]) * (x - p[0]) for p, q in ((a, b), (b, c), (c, a))]
                hit |= ((e[0] >= 0) & (e[1] >= 0) & (e[2] >= 0)) | ((e[0] <= 0) & (e[1] <= 0) & (e[2] <= 0))
            covered += hit
    covered /= supersample ** 2
    bg = np.asarray(background, dtype=np.float64)
    return bg * (1 - covered[..., None]) + np.asarray(color, dtype=np.float64) * covered[..., None]
