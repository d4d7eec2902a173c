"""UV-space position maps: rasterisation, inverse vertex sampling, Laplacian, ``.pmap`` files.

Texel ``(i, j)`` of an ``H x W`` map has its centre at
``u = (j + 0.5) / W`` and ``v = (i + 0.5) / H``; rows run along ``v``.
"""

from __future__ import annotations

import hashlib
import logging
import struct
import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from ..errors import DataError, DegenerateGeometryError, DimensionError
from .mesh import TriMesh

log = logging.getLogger(__name__)

RESOLUTION = 256
SENTINEL = 0.0
OVERLAP_WARN_FRACTION = 0.01


class UVOverlapWarning(UserWarning):
    """More than 1% of covered texels were claimed by several UV triangles."""


@dataclass(frozen=True)
class PositionMap:
    data: np.ndarray   # [H, W, 3] float32, metres
    mask: np.ndarray   # [H, W] uint8, 1 = covered

    def __post_init__(self):
        if self.data.ndim != 3 or self.data.shape[2] != 3 or self.mask.shape != self.data.shape[:2]:
            raise DimensionError(f"position map {self.data.shape} / mask {self.mask.shape} mismatch")

    @property
    def resolution(self) -> tuple[int, int]:
        return self.data.shape[:2]

    def masked_values(self) -> np.ndarray:
        return self.data[self.mask.astype(bool)]


@dataclass(frozen=True)
class RasterPlan:
    """Texel to (face, barycentric) lookup for one UV layout."""

    face_index: np.ndarray   # [H, W] int64, -1 where uncovered
    bary: np.ndarray         # [H, W, 3] float64
    conflicts: int

    @property
    def mask(self) -> np.ndarray:
        return (self.face_index >= 0).astype(np.uint8)

    def apply(self, vertices: np.ndarray, faces: np.ndarray) -> np.ndarray:
        """Fill ``[H, W, 3]`` by barycentric interpolation of ``vertices``."""
        h, w = self.face_index.shape
        out = np.full((h, w, 3), SENTINEL, dtype=np.float32)
        covered = self.face_index >= 0
        corners = faces[self.face_index[covered]]                       # [M, 3]
        v = np.asarray(vertices, dtype=np.float64)
        b = self.bary[covered]
        out[covered] = np.einsum("mk,mkc->mc", b, v[corners]).astype(np.float32)
        return out


def build_raster_plan(uv: np.ndarray, uv_faces: np.ndarray, resolution: int | tuple[int, int] = RESOLUTION,
                      edge_tol: float = 1e-9) -> RasterPlan:
    h, w = (resolution, resolution) if np.isscalar(resolution) else resolution
    uv = np.asarray(uv, dtype=np.float64)
    if uv.size and (uv.min() < 0.0 or uv.max() > 1.0):
        raise DegenerateGeometryError("UV chart extends outside [0, 1]^2")
    face_index = np.full((h, w), -1, dtype=np.int64)
    bary = np.zeros((h, w, 3))
    conflicts = 0
    tri = uv[uv_faces]                                                   # [F, 3, 2]
    px = tri[..., 0] * w - 0.5                                           # texel-centre coordinates
    py = tri[..., 1] * h - 0.5
    for f in range(len(uv_faces)):
        x0, x1, x2 = px[f]
        y0, y1, y2 = py[f]
        det = (x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0)
        if abs(det) <= 1e-12 * w * h:
            raise DegenerateGeometryError(f"UV triangle {f} is degenerate")
        j_lo = max(int(np.ceil(min(x0, x1, x2) - edge_tol)), 0)
        j_hi = min(int(np.floor(max(x0, x1, x2) + edge_tol)), w - 1)
        i_lo = max(int(np.ceil(min(y0, y1, y2) - edge_tol)), 0)
        i_hi = min(int(np.floor(max(y0, y1, y2) + edge_tol)), h - 1)
        if j_lo > j_hi or i_lo > i_hi:
            continue
        jj, ii = np.meshgrid(np.arange(j_lo, j_hi + 1), np.arange(i_lo, i_hi + 1))
        b1 = ((jj - x0) * (y2 - y0) - (x2 - x0) * (ii - y0)) / det
        b2 = ((x1 - x0) * (ii - y0) - (jj - x0) * (y1 - y0)) / det
        b0 = 1.0 - b1 - b2
        inside = (b0 >= -edge_tol) & (b1 >= -edge_tol) & (b2 >= -edge_tol)
        if not inside.any():
            continue
        strict = ((b0 > edge_tol) & (b1 > edge_tol) & (b2 > edge_tol))[inside]
        ii, jj = ii[inside], jj[inside]
        free = face_index[ii, jj] < 0
        # texel centres on a shared edge are claimed twice by well-formed charts
        conflicts += int((~free & strict).sum())
        ii, jj = ii[free], jj[free]
        face_index[ii, jj] = f
        bary[ii, jj] = np.column_stack([b0[inside][free], b1[inside][free], b2[inside][free]])
    covered = int((face_index >= 0).sum())
    if covered and conflicts > OVERLAP_WARN_FRACTION * covered:
        warnings.warn(f"{conflicts} texels claimed by several UV triangles ({covered} covered)",
                      UVOverlapWarning, stacklevel=2)
    return RasterPlan(face_index, bary, conflicts)


_PLAN_CACHE: dict[tuple, RasterPlan] = {}


def raster_plan_for(mesh: TriMesh, resolution: int = RESOLUTION) -> RasterPlan:
    """Cached plan; meshes in one sequence share their UV layout."""
    digest = hashlib.sha1(np.ascontiguousarray(mesh.uv, np.float64).tobytes()
                          + np.ascontiguousarray(mesh.uv_faces, np.int64).tobytes()).hexdigest()
    key = (digest, resolution)
    plan = _PLAN_CACHE.get(key)
    if plan is None:
        if len(_PLAN_CACHE) > 16:
            _PLAN_CACHE.clear()
        plan = _PLAN_CACHE[key] = build_raster_plan(mesh.uv, mesh.uv_faces, resolution)
    return plan


def rasterize_position_map(mesh: TriMesh, resolution: int = RESOLUTION) -> PositionMap:
    plan = raster_plan_for(mesh, resolution)
    return PositionMap(plan.apply(mesh.vertices, mesh.faces), plan.mask)


class SampledVertices(NamedTuple):
    vertices: np.ndarray   # [V, 3] float32
    missing: np.ndarray    # indices whose UV saw no masked texel; filled from the template


def sample_vertices(pmap: PositionMap, template: TriMesh) -> SampledVertices:
    """Bilinear lookup at each vertex's UV, renormalised over masked texels."""
    h, w = pmap.resolution
    uv, has_uv = template.vertex_uv()
    x = uv[:, 0] * w - 0.5
    y = uv[:, 1] * h - 0.5
    j0 = np.floor(x).astype(np.int64)
    i0 = np.floor(y).astype(np.int64)
    fx, fy = x - j0, y - i0
    data = pmap.data.astype(np.float64)
    mask = pmap.mask.astype(np.float64)
    acc = np.zeros((len(uv), 3))
    wsum = np.zeros(len(uv))
    for di, dj, wt in ((0, 0, (1 - fy) * (1 - fx)), (0, 1, (1 - fy) * fx),
                       (1, 0, fy * (1 - fx)), (1, 1, fy * fx)):
        ii, jj = i0 + di, j0 + dj
        ok = (ii >= 0) & (ii < h) & (jj >= 0) & (jj < w)
        ic, jc = np.clip(ii, 0, h - 1), np.clip(jj, 0, w - 1)
        wk = np.where(ok, wt * mask[ic, jc], 0.0)
        acc += wk[:, None] * data[ic, jc]
        wsum += wk
    missing = np.flatnonzero((wsum <= 1e-12) | ~has_uv)
    out = template.vertices.astype(np.float64).copy()
    good = np.setdiff1d(np.arange(len(uv)), missing)
    out[good] = acc[good] / wsum[good, None]
    if missing.size:
        log.warning("%d vertices fell outside the position-map mask; template positions used", missing.size)
    return SampledVertices(out.astype(np.float32), missing)


def neighbour_weights(mask: np.ndarray) -> list[tuple[np.ndarray, np.ndarray]]:
    """For N, S, W, E: the shifted-index validity mask used by the Neumann Laplacian.

    Each entry is ``(valid, m)`` where ``valid[i, j]`` says the neighbour
    exists and is masked, and ``m`` is the centre mask.
    """
    m = mask.astype(bool)
    out = []
    for axis, step in ((0, -1), (0, 1), (1, -1), (1, 1)):
        nb = np.zeros_like(m)
        src = [slice(None), slice(None)]
        dst = [slice(None), slice(None)]
        if step < 0:
            dst[axis], src[axis] = slice(1, None), slice(None, -1)
        else:
            dst[axis], src[axis] = slice(None, -1), slice(1, None)
        nb[tuple(dst)] = m[tuple(src)]
        out.append((nb, m))
    return out


def image_laplacian(image: np.ndarray, mask: np.ndarray | None = None) -> np.ndarray:
    """Four-neighbour Laplacian per channel with reflecting (Neumann) mask boundaries.

    Neighbours that fall outside the image or the mask take the centre
    value, and unmasked centres output zero.
    """
    x = np.asarray(image, dtype=np.float64)
    squeeze = x.ndim == 2
    if squeeze:
        x = x[..., None]
    if mask is None:
        mask = np.ones(x.shape[:2], dtype=bool)
    out = np.zeros_like(x)
    shifts = ((1, 0), (-1, 0), (1, 1), (-1, 1))   # np.roll shift, axis: N, S, W, E
    for (valid, m), (shift, axis) in zip(neighbour_weights(mask), shifts):
        nb = np.roll(x, shift, axis=axis)
        out += np.where(valid[..., None], nb - x, 0.0)
    out[~mask.astype(bool)] = 0.0
    return out[..., 0] if squeeze else out


# ----------------------------------------------------------------------
# .pmap
# ----------------------------------------------------------------------

_PMAP_HEADER = struct.Struct("<4sII")


def write_pmap(path, pmap: PositionMap):
    h, w = pmap.resolution
    with open(path, "wb") as fh:
        fh.write(_PMAP_HEADER.pack(b"PMAP", h, w))
        fh.write(np.ascontiguousarray(pmap.data, dtype="<f4").tobytes())
        fh.write(np.ascontiguousarray(pmap.mask, dtype=np.uint8).tobytes())


def read_pmap(path) -> PositionMap:
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < _PMAP_HEADER.size:
        raise DataError(f"{path}: too short for a PMAP header")
    magic, h, w = _PMAP_HEADER.unpack_from(blob)
    if magic != b"PMAP":
        raise DataError(f"{path}: bad magic {magic!r}")
    n_data = h * w * 3 * 4
    if len(blob) != _PMAP_HEADER.size + n_data + h * w:
        raise DataError(f"{path}: size does not match a {h}x{w} position map")
    off = _PMAP_HEADER.size
    data = np.frombuffer(blob, "<f4", count=h * w * 3, offset=off).reshape(h, w, 3).astype(np.float32)
    mask = np.frombuffer(blob, np.uint8, offset=off + n_data).reshape(h, w).copy()
    return PositionMap(data, mask)
