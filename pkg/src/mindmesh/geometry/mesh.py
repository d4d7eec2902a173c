"""Triangle meshes with a UV layout, and Wavefront OBJ I/O."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from ..errors import DataError, DegenerateGeometryError, DimensionError


@dataclass(frozen=True)
class TriMesh:
    """Fixed-topology mesh; across a sequence only ``vertices`` change.

    ``faces`` index ``vertices`` and ``uv_faces`` index ``uv`` corner by
    corner, so seams may give one vertex several UV coordinates.
    """

    vertices: np.ndarray
    faces: np.ndarray
    uv: np.ndarray
    uv_faces: np.ndarray

    def __post_init__(self):
        v, f, uv, uvf = self.vertices, self.faces, self.uv, self.uv_faces
        if v.ndim != 2 or v.shape[1] != 3:
            raise DimensionError(f"vertices must be [V, 3], got {v.shape}")
        if f.ndim != 2 or f.shape[1] != 3 or uvf.shape != f.shape:
            raise DimensionError(f"faces {f.shape} and uv_faces {uvf.shape} must both be [F, 3]")
        if uv.ndim != 2 or uv.shape[1] != 2:
            raise DimensionError(f"uv must be [Vt, 2], got {uv.shape}")
        if f.size and (f.min() < 0 or f.max() >= len(v)):
            raise DataError("face index out of range")
        if uvf.size and (uvf.min() < 0 or uvf.max() >= len(uv)):
            raise DataError("uv face index out of range")

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_faces(self) -> int:
        return len(self.faces)

    def with_vertices(self, vertices) -> TriMesh:
        vertices = np.asarray(vertices, dtype=self.vertices.dtype)
        if vertices.shape != self.vertices.shape:
            raise DimensionError(f"vertex array {vertices.shape} does not match topology {self.vertices.shape}")
        return dataclasses.replace(self, vertices=vertices)

    def face_areas(self) -> np.ndarray:
        v = self.vertices.astype(np.float64)
        a, b, c = v[self.faces[:, 0]], v[self.faces[:, 1]], v[self.faces[:, 2]]
        return 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)

    def validate(self, min_area: float = 1e-12):
        """Raise if any face is degenerate."""
        areas = self.face_areas()
        bad = np.flatnonzero(areas <= min_area)
        if bad.size:
            raise DegenerateGeometryError(f"{bad.size} degenerate faces, first is {bad[0]}")

    def bbox_diagonal(self) -> float:
        v = self.vertices.astype(np.float64)
        return float(np.linalg.norm(v.max(axis=0) - v.min(axis=0)))

    def vertex_uv(self) -> tuple[np.ndarray, np.ndarray]:
        """UV of each vertex (first corner that references it) and a has-UV flag."""
        corners = self.faces.ravel()
        uv_corners = self.uv_faces.ravel()
        uniq, first = np.unique(corners, return_index=True)
        out = np.zeros((self.n_vertices, 2))
        found = np.zeros(self.n_vertices, dtype=bool)
        out[uniq] = self.uv[uv_corners[first]]
        found[uniq] = True
        return out, found

    def adjacency(self) -> sp.csr_matrix:
        """Symmetric 0/1 vertex adjacency from the triangle edges."""
        f = self.faces
        i = np.concatenate([f[:, 0], f[:, 1], f[:, 2], f[:, 1], f[:, 2], f[:, 0]])
        j = np.concatenate([f[:, 1], f[:, 2], f[:, 0], f[:, 0], f[:, 1], f[:, 2]])
        n = self.n_vertices
        adj = sp.coo_matrix((np.ones(len(i)), (i, j)), shape=(n, n)).tocsr()
        adj.data[:] = 1.0
        return adj


def grid_mesh(rows: int, cols: int, margin: float = 0.02) -> TriMesh:
    """Flat ``rows x cols`` vertex grid in the xy-plane with matching UVs in ``[margin, 1-margin]``."""
    u = np.linspace(margin, 1.0 - margin, cols)
    v = np.linspace(margin, 1.0 - margin, rows)
    uu, vv = np.meshgrid(u, v)
    uv = np.column_stack([uu.ravel(), vv.ravel()])
    idx = np.arange(rows * cols).reshape(rows, cols)
    a, b = idx[:-1, :-1].ravel(), idx[:-1, 1:].ravel()
    c, d = idx[1:, :-1].ravel(), idx[1:, 1:].ravel()
    faces = np.stack([np.column_stack([a, b, d]), np.column_stack([a, d, c])], axis=1)
    faces = faces.reshape(-1, 3).astype(np.int64)
    verts = np.column_stack([uv, np.zeros(len(uv))])
    return TriMesh(verts.astype(np.float32), faces, uv.astype(np.float32), faces.copy())


# ----------------------------------------------------------------------
# OBJ
# ----------------------------------------------------------------------

def _fmt(x: float) -> str:
    return format(float(x), ".9g")


def write_obj(path, mesh: TriMesh):
    """Write ``v``, ``vt`` and ``f a/b`` records in array order."""
    lines = []
    for x, y, z in mesh.vertices:
        lines.append(f"v {_fmt(x)} {_fmt(y)} {_fmt(z)}")
    for u, v in mesh.uv:
        lines.append(f"vt {_fmt(u)} {_fmt(v)}")
    for (a, b, c), (ta, tb, tc) in zip(mesh.faces + 1, mesh.uv_faces + 1):
        lines.append(f"f {a}/{ta} {b}/{tb} {c}/{tc}")
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_obj(path) -> TriMesh:
    verts, uvs, faces, uv_faces = [], [], [], []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.split()
            if not parts or parts[0].startswith("#"):
                continue
            try:
                if parts[0] == "v":
                    verts.append([float(p) for p in parts[1:4]])
                elif parts[0] == "vt":
                    uvs.append([float(p) for p in parts[1:3]])
                elif parts[0] == "f":
                    if len(parts) != 4:
                        raise DataError(f"{path}:{lineno}: only triangles are supported")
                    corner = [p.split("/") for p in parts[1:]]
                    faces.append([int(c[0]) - 1 for c in corner])
                    if all(len(c) > 1 and c[1] for c in corner):
                        uv_faces.append([int(c[1]) - 1 for c in corner])
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from exc
    faces = np.array(faces, dtype=np.int64).reshape(-1, 3)
    if uv_faces and len(uv_faces) != len(faces):
        raise DataError(f"{path}: some faces lack texture indices")
    uv_faces = np.array(uv_faces, dtype=np.int64).reshape(-1, 3) if uv_faces else faces.copy()
    uv = np.array(uvs, dtype=np.float32).reshape(-1, 2)
    if not uvs:
        uv = np.zeros((len(verts), 2), np.float32)
    return TriMesh(np.array(verts, dtype=np.float32).reshape(-1, 3), faces, uv, uv_faces)
