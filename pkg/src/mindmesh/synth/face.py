"""Face proxy: a UV-parameterised half ellipsoid driven by a few smooth deformation fields."""

from __future__ import annotations

from collections.abc import Sequence
from typing import NamedTuple

import numpy as np
from scipy.ndimage import gaussian_filter1d

from ..geometry.mesh import TriMesh, grid_mesh
from ..geometry.posmap import PositionMap, raster_plan_for
from .config import SynthConfig

_SPAN = 0.9 * np.pi   # angular extent of the chart in both directions


def base_mesh(cfg: SynthConfig) -> TriMesh:
    """Half ellipsoid facing +z; UV rows run top to bottom of the face."""
    rows, cols = cfg.grid
    flat = grid_mesh(rows, cols)
    uv = flat.uv.astype(np.float64)
    theta = (uv[:, 0] - 0.5) * _SPAN
    phi = (0.5 - uv[:, 1]) * _SPAN
    a, b, c = cfg.radii
    verts = np.column_stack([a * np.sin(theta) * np.cos(phi), b * np.sin(phi), c * np.cos(theta) * np.cos(phi)])
    return flat.with_vertices(verts.astype(np.float32))


def _normals(cfg: SynthConfig, mesh: TriMesh) -> np.ndarray:
    a, b, c = cfg.radii
    v = mesh.vertices.astype(np.float64)
    n = v / np.array([a * a, b * b, c * c])
    return n / np.linalg.norm(n, axis=1, keepdims=True)


def _frequency_pairs(count: int) -> list[tuple[int, int]]:
    pairs = sorted(((p, q) for p in range(6) for q in range(6) if (p, q) != (0, 0)),
                   key=lambda pq: (pq[0] + pq[1], pq[0]))
    return pairs[:count]


def deformation_basis(cfg: SynthConfig, mesh: TriMesh | None = None) -> np.ndarray:
    """``[V, 3, D]`` normal-direction cosine fields, mutually orthogonal, equal RMS."""
    mesh = base_mesh(cfg) if mesh is None else mesh
    uv, _ = mesh.vertex_uv()
    normals = _normals(cfg, mesh)
    cols = []
    for p, q in _frequency_pairs(cfg.latent_dim):
        f = np.cos(p * np.pi * uv[:, 0]) * np.cos(q * np.pi * uv[:, 1])
        cols.append((f[:, None] * normals).ravel())
    q_mat, r = np.linalg.qr(np.column_stack(cols))
    q_mat = q_mat * np.sign(np.diag(r))          # keep the sign of the original fields
    v = mesh.n_vertices
    return (q_mat * cfg.deform_rms * np.sqrt(v)).reshape(v, 3, cfg.latent_dim)


def latent_trajectory(cfg: SynthConfig, rng: np.random.Generator, n_frames: int) -> np.ndarray:
    """Gaussian-smoothed noise with roughly ``latent_bandwidth_hz`` bandwidth, unit std per dimension."""
    sigma = cfg.fps / (2 * np.pi * cfg.latent_bandwidth_hz)
    pad = int(4 * sigma)
    raw = rng.standard_normal((n_frames + 2 * pad, cfg.latent_dim))
    smooth = gaussian_filter1d(raw, sigma, axis=0, mode="nearest")[pad:pad + n_frames]
    smooth = smooth - smooth.mean(axis=0)
    std = smooth.std(axis=0)
    return (smooth / np.where(std > 0, std, 1.0)).astype(np.float32)


class FrameSequence(Sequence):
    """Lazy per-frame meshes or position maps built from a vertex stack."""

    def __init__(self, template: TriMesh, vertices: np.ndarray, kind: str, resolution: int = 256):
        self.template = template
        self.vertices = vertices
        self.kind = kind
        self.resolution = resolution

    def __len__(self) -> int:
        return len(self.vertices)

    def __getitem__(self, i):
        if isinstance(i, slice):
            return [self[k] for k in range(*i.indices(len(self)))]
        if self.kind == "mesh":
            return self.template.with_vertices(self.vertices[i])
        plan = raster_plan_for(self.template, self.resolution)
        return PositionMap(plan.apply(self.vertices[i], self.template.faces), plan.mask)


class FaceSequence(NamedTuple):
    meshes: FrameSequence
    maps: FrameSequence
    latents: np.ndarray


def vertices_from_latents(cfg: SynthConfig, latents: np.ndarray, template: TriMesh | None = None,
                          basis: np.ndarray | None = None) -> np.ndarray:
    template = base_mesh(cfg) if template is None else template
    basis = deformation_basis(cfg, template) if basis is None else basis
    v = template.vertices.astype(np.float64)[None] + np.einsum("vcd,td->tvc", basis, latents)
    return v.astype(np.float32)


def generate_face_sequence(cfg: SynthConfig, latents: np.ndarray | None = None,
                           trial: int = 0) -> FaceSequence:
    """Meshes, maps and latents for one trial's frames (lead-in excluded)."""
    if latents is None:
        rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 1, trial]))
        full = latent_trajectory(cfg, rng, cfg.lead_in_frames + cfg.frames_per_trial)
        latents = full[cfg.lead_in_frames:]
    latents = np.asarray(latents, dtype=np.float32)
    template = base_mesh(cfg)
    verts = vertices_from_latents(cfg, latents, template)
    return FaceSequence(FrameSequence(template, verts, "mesh"),
                        FrameSequence(template, verts, "map", cfg.resolution), latents)
