"""Projection of bound splats and tiled front-to-back alpha compositing."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..autodiff import functional as F
from ..autodiff.tensor import Tensor, make_result
from ..geometry.frames import FaceFrame, face_frames
from ..geometry.mesh import TriMesh
from .camera import Camera
from .sh import sh_color_t
from .splats import SplatParams, SplatSet

TILE = 16
T_MIN = 1e-4          # compositing stops once transmittance falls below this
ALPHA_MAX = 0.9999    # keeps 1 - alpha invertible in the backward pass
CUTOFF = 4.5          # half the squared Mahalanobis radius: splats vanish beyond 3 sigma
WHITE = (1.0, 1.0, 1.0)


def _tile_bins(means: np.ndarray, radius: np.ndarray, order: np.ndarray, h: int, w: int):
    """Front-to-back splat ids touching each tile, keyed by tile origin."""
    bins = {}
    lo = np.floor((means - radius[:, None]) / TILE).astype(int)
    hi = np.floor((means + radius[:, None]) / TILE).astype(int)
    ty, tx = (h + TILE - 1) // TILE, (w + TILE - 1) // TILE
    for i in order:
        x0, y0 = max(lo[i, 0], 0), max(lo[i, 1], 0)
        x1, y1 = min(hi[i, 0], tx - 1), min(hi[i, 1], ty - 1)
        for by in range(y0, y1 + 1):
            for bx in range(x0, x1 + 1):
                bins.setdefault((by, bx), []).append(i)
    return bins


def _tile_alpha(ids, means, conics, opacity, ys, xs):
    """Per-(splat, pixel) alpha for one tile with the quantities the backward needs."""
    px = (xs + 0.5)[None, :] - means[ids, 0:1]
    py = (ys + 0.5)[None, :] - means[ids, 1:2]
    a, b, c = conics[ids, 0:1], conics[ids, 1:2], conics[ids, 2:3]
    power = -0.5 * (a * px * px + c * py * py) - b * px * py
    inside = power >= -CUTOFF
    g = np.where(inside, np.exp(np.minimum(power, 0.0)), 0.0)
    raw = opacity[ids, None] * g
    alpha = np.minimum(raw, ALPHA_MAX)
    trans = np.cumprod(np.vstack([np.ones((1, alpha.shape[1])), 1.0 - alpha[:-1]]), axis=0)
    alive = trans >= T_MIN
    return px, py, g, raw, alpha, trans, alive


def rasterize(means: Tensor, conics: Tensor, opacity: Tensor, colors: Tensor, radius: np.ndarray,
              order: np.ndarray, height: int, width: int) -> Tensor:
    """Composite splats front to back into a premultiplied ``(H, W, 4)`` RGBA image.

    ``C = sum_i c_i a_i prod_{j<i} (1 - a_j)`` with ``a_i = o_i G_i``; the
    alpha channel is ``sum_i a_i prod_{j<i} (1 - a_j)``.
    """
    m, q, o, col = means.data, conics.data, opacity.data, colors.data
    dt = m.dtype
    out = np.zeros((height, width, 4), dtype=dt)
    bins = _tile_bins(m, radius, order, height, width)
    for (by, bx), ids in bins.items():
        ids = np.asarray(ids)
        yy, xx = np.mgrid[by * TILE:min((by + 1) * TILE, height), bx * TILE:min((bx + 1) * TILE, width)]
        *_, alpha, trans, alive = _tile_alpha(ids, m, q, o, yy.ravel().astype(dt), xx.ravel().astype(dt))
        wgt = alpha * trans * alive
        out[yy, xx, :3] = (wgt.T @ col[ids]).reshape(yy.shape + (3,))
        out[yy, xx, 3] = wgt.sum(axis=0).reshape(yy.shape)

    def backward(g_out):
        gm, gq, go, gc = np.zeros_like(m), np.zeros_like(q), np.zeros_like(o), np.zeros_like(col)
        for (by, bx), ids in bins.items():
            ids = np.asarray(ids)
            yy, xx = np.mgrid[by * TILE:min((by + 1) * TILE, height), bx * TILE:min((bx + 1) * TILE, width)]
            px, py, gauss, raw, alpha, trans, alive = _tile_alpha(
                ids, m, q, o, yy.ravel().astype(dt), xx.ravel().astype(dt))
            grgb = g_out[yy, xx, :3].reshape(-1, 3)                 # (P, 3)
            ga = g_out[yy, xx, 3].reshape(-1)                         # (P,)
            wgt = alpha * trans * alive
            np.add.at(gc, ids, wgt @ grgb)
            # per-splat scalar "colour" seen by the upstream gradient, alpha channel included
            proj = col[ids] @ grgb.T + ga[None, :]                    # (n, P)
            contrib = wgt * proj
            after = np.cumsum(contrib[::-1], axis=0)[::-1] - contrib  # sum over splats behind
            g_alpha = alive * (trans * proj - after / (1.0 - alpha))
            g_alpha = np.where(raw < ALPHA_MAX, g_alpha, 0.0)
            np.add.at(go, ids, (g_alpha * gauss).sum(axis=1))
            g_pow = g_alpha * raw * (gauss > 0)
            a, b, c = q[ids, 0:1], q[ids, 1:2], q[ids, 2:3]
            np.add.at(gm, ids, np.stack([(g_pow * (a * px + b * py)).sum(1),
                                         (g_pow * (b * px + c * py)).sum(1)], axis=1))
            np.add.at(gq, ids, np.stack([(-0.5 * g_pow * px * px).sum(1), (-g_pow * px * py).sum(1),
                                         (-0.5 * g_pow * py * py).sum(1)], axis=1))
        return gm, gq, go, gc

    return make_result(out, (means, conics, opacity, colors), backward)


@dataclass
class RenderResult:
    rgba: Tensor          # (H, W, 4) premultiplied colour and coverage
    culled: int
    order: np.ndarray     # splat ids front to back (culled splats excluded)

    @property
    def rgb(self) -> np.ndarray:
        return self.rgba.data[..., :3]

    @property
    def alpha(self) -> np.ndarray:
        return self.rgba.data[..., 3]

    def composite(self, background=WHITE) -> Tensor:
        """Colour over an opaque background, still on the tape."""
        rgb = F.getitem(self.rgba, (Ellipsis, slice(0, 3)))
        a = F.getitem(self.rgba, (Ellipsis, slice(3, 4)))
        bg = np.asarray(background, dtype=self.rgba.dtype)
        return rgb + (1.0 - a) * Tensor(bg)

    def image(self, background=WHITE) -> np.ndarray:
        return self.composite(background).data


def render_params(params: SplatParams, mesh: TriMesh, camera: Camera) -> RenderResult:
    """Differentiable render of trainable splats bound to ``mesh``."""
    frames = FaceFrame(*face_frames(mesh.vertices, mesh.faces))
    rot, center, scale = params.world(frames)
    depth = camera.to_camera(center.data)[:, 2]
    keep = np.flatnonzero(depth > camera.near)
    culled = len(depth) - len(keep)
    dt = params.offset.dtype
    if len(keep) == 0:
        return RenderResult(Tensor(np.zeros((camera.height, camera.width, 4), dtype=dt)), culled, keep)
    rot, center, scale = (F.getitem(t, keep) for t in (rot, center, scale))
    cov = F.matmul(rot * F.reshape(scale * scale, (-1, 1, 3)), F.transpose(rot, (0, 2, 1)))
    mean2, cov2, z = camera.project_t(center, cov)
    a = F.getitem(cov2, (slice(None), 0, 0))
    b = F.getitem(cov2, (slice(None), 0, 1))
    c = F.getitem(cov2, (slice(None), 1, 1))
    det = a * c - b * b
    conics = F.stack([c / det, -b / det, a / det], axis=1)
    # SH are read in the face frame so colour travels with the mesh
    view = center - Tensor(camera.position.astype(dt))
    view = view / F.sqrt(F.sum(view * view, axis=1, keepdims=True))
    face_rot = Tensor(frames.R[params.face[keep]].astype(dt))
    view = F.reshape(F.matmul(F.reshape(view, (-1, 1, 3)), face_rot), (-1, 3))
    colors = sh_color_t(F.getitem(params.sh, keep), view)
    opacity = F.getitem(params.opacity(), keep)
    mid = 0.5 * (a.data + c.data)
    lam = mid + np.sqrt(np.maximum(mid * mid - det.data, 0.0))
    radius = 3.0 * np.sqrt(lam)
    order = np.lexsort((np.arange(len(keep)), z.data))         # depth, ties by index
    rgba = rasterize(mean2, conics, opacity, colors, radius, order, camera.height, camera.width)
    return RenderResult(rgba, culled, keep[order])


def render(splats: SplatSet, mesh: TriMesh, camera: Camera) -> RenderResult:
    """Render a fixed splat set bound to ``mesh`` (no gradients recorded)."""
    return render_params(SplatParams(splats), mesh, camera)
