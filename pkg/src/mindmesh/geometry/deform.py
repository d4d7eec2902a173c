"""Linear shape-basis fitting and uniform-Laplacian mesh deformation."""

from __future__ import annotations

from collections.abc import Mapping

import numpy as np
import scipy.sparse as sp

from ..errors import DegenerateGeometryError, DimensionError, RankError, SolverError
from .mesh import TriMesh


def fit_shape_basis(indices, positions, mean_shape, basis, damping: float = 1e-6) -> np.ndarray:
    """Coefficients ``beta`` with ``positions ~ mean[indices] + basis[indices] @ beta``.

    ``basis`` is ``[V, 3, D]``. The normal equations carry a Tikhonov term
    ``damping * |beta|^2``.
    """
    idx = np.asarray(indices, dtype=np.int64).ravel()
    obs = np.asarray(positions, dtype=np.float64).reshape(-1, 3)
    mean = np.asarray(mean_shape, dtype=np.float64)
    b = np.asarray(basis, dtype=np.float64)
    if b.ndim != 3 or b.shape[:2] != mean.shape or mean.shape[1] != 3:
        raise DimensionError(f"basis {b.shape} does not match mean shape {mean.shape}")
    if len(idx) != len(obs):
        raise DimensionError(f"{len(idx)} indices for {len(obs)} observed positions")
    d = b.shape[2]
    a = b[idx].reshape(-1, d)
    if a.shape[0] < d:
        raise RankError(f"{a.shape[0]} scalar constraints for {d} coefficients", d - a.shape[0])
    s = np.linalg.svd(a, compute_uv=False)
    rank = int((s > s[0] * 1e-10).sum()) if s.size and s[0] > 0 else 0
    if rank < d:
        raise RankError(f"basis has rank {rank} on the observed vertices, need {d}", d - rank)
    rhs = (obs - mean[idx]).ravel()
    return np.linalg.solve(a.T @ a + damping * np.eye(d), a.T @ rhs)


def uniform_laplacian(mesh: TriMesh) -> sp.csr_matrix:
    """``I - D^-1 A`` over the edge graph."""
    adj = mesh.adjacency()
    deg = np.asarray(adj.sum(axis=1)).ravel()
    inv = np.divide(1.0, deg, out=np.zeros_like(deg), where=deg > 0)
    return (sp.identity(mesh.n_vertices, format="csr") - sp.diags(inv) @ adj).tocsr()


def conjugate_gradient(matvec, b: np.ndarray, precond: np.ndarray, tol: float = 1e-8,
                       max_iter: int = 1000) -> tuple[np.ndarray, int]:
    """Jacobi-preconditioned CG, one independent solve per column of ``b``.

    Stops once ``|r| <= tol * |b|`` for every column.
    """
    x = np.zeros_like(b)
    r = b - matvec(x)
    z = precond[:, None] * r
    p = z.copy()
    rz = (r * z).sum(axis=0)
    bnorm = np.linalg.norm(b, axis=0)
    bnorm[bnorm == 0] = 1.0
    for it in range(1, max_iter + 1):
        if np.all(np.linalg.norm(r, axis=0) <= tol * bnorm):
            return x, it - 1
        ap = matvec(p)
        pap = (p * ap).sum(axis=0)
        alpha = np.divide(rz, pap, out=np.zeros_like(rz), where=pap != 0)
        x += alpha * p
        r -= alpha * ap
        z = precond[:, None] * r
        rz_new = (r * z).sum(axis=0)
        beta = np.divide(rz_new, rz, out=np.zeros_like(rz), where=rz != 0)
        p = z + beta * p
        rz = rz_new
    res = float((np.linalg.norm(r, axis=0) / bnorm).max())
    if res <= tol:
        return x, max_iter
    raise SolverError(f"conjugate gradient did not converge in {max_iter} iterations", res)


def laplacian_deform(template: TriMesh, constraints: Mapping[int, np.ndarray] | tuple,
                     weight: float = 1e3, tol: float = 1e-13) -> TriMesh:
    """Move constrained vertices towards targets while preserving Laplacian detail.

    Minimises ``|L v - L v0|^2 + weight^2 * sum_c |v_c - target_c|^2`` for each
    coordinate through CG on the normal equations, posed for the displacement
    ``v - v0`` so the residual tolerance is relative to the deformation itself.
    """
    if isinstance(constraints, Mapping):
        idx = np.fromiter(constraints.keys(), dtype=np.int64, count=len(constraints))
        tgt = np.array([np.asarray(constraints[i], dtype=np.float64) for i in idx]).reshape(-1, 3)
    else:
        idx = np.asarray(constraints[0], dtype=np.int64)
        tgt = np.asarray(constraints[1], dtype=np.float64).reshape(-1, 3)
    if len(idx) < 3:
        raise DegenerateGeometryError(f"need at least 3 constrained vertices, got {len(idx)}")
    sv = np.linalg.svd(tgt - tgt.mean(axis=0), compute_uv=False)
    if sv[0] <= 0 or sv[1] <= 1e-10 * sv[0]:
        raise DegenerateGeometryError("constraint targets are collinear")

    v0 = template.vertices.astype(np.float64)
    n = len(v0)
    lap = uniform_laplacian(template)
    normal = (lap.T @ lap).tocsr()
    sel = np.zeros(n)
    np.add.at(sel, idx, weight ** 2)
    rhs = np.zeros((n, 3))
    np.add.at(rhs, idx, weight ** 2 * (tgt - v0[idx]))
    system = (normal + sp.diags(sel)).tocsr()
    diag = system.diagonal()
    precond = np.divide(1.0, diag, out=np.zeros_like(diag), where=diag > 0)
    d, _ = conjugate_gradient(lambda p: system @ p, rhs, precond, tol=tol, max_iter=10 * n)
    return template.with_vertices((v0 + d).astype(np.float32))
