import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mindmesh.errors import DataError, DegenerateGeometryError, RankError
from mindmesh.geometry import (
    PositionMap,
    TriMesh,
    UVOverlapWarning,
    build_raster_plan,
    face_frame,
    face_frames,
    fit_shape_basis,
    grid_mesh,
    image_laplacian,
    kabsch_align,
    laplacian_deform,
    random_rotation,
    rasterize_position_map,
    read_obj,
    read_pmap,
    sample_vertices,
    write_obj,
    write_pmap,
)


def rms(a):
    return float(np.sqrt(np.mean(np.sum(np.asarray(a, np.float64) ** 2, axis=-1))))


# -- Kabsch ---------------------------------------------------------------------

def test_kabsch_identity():
    x = np.random.default_rng(0).normal(size=(20, 3))
    tr = kabsch_align(x, x)
    np.testing.assert_allclose(tr.rotation, np.eye(3), atol=1e-10)
    np.testing.assert_allclose(tr.translation, 0, atol=1e-10)


def test_kabsch_recovers_1000_random_transforms():
    rng = np.random.default_rng(1)
    worst = 0.0
    for _ in range(1000):
        x = rng.normal(size=(rng.integers(3, 40), 3))
        r0, t0 = random_rotation(rng), rng.normal(size=3)
        y = x @ r0.T + t0
        tr = kabsch_align(x, y)
        worst = max(worst, rms(tr.apply(x) - y))
        np.testing.assert_allclose(tr.rotation, r0, atol=1e-8)
        np.testing.assert_allclose(tr.translation, t0, atol=1e-8)
    assert worst < 1e-9


def test_kabsch_mirrored_targets_still_proper():
    rng = np.random.default_rng(2)
    mirror = np.diag([1.0, 1.0, -1.0])
    for _ in range(1000):
        x = rng.normal(size=(30, 3)) * [1.0, 1.0, 1e-3]   # near-planar
        y = x @ mirror.T @ random_rotation(rng).T + rng.normal(size=3)
        r = kabsch_align(x, y).rotation
        assert np.linalg.det(r) == pytest.approx(1.0, abs=1e-6)
        np.testing.assert_allclose(r.T @ r, np.eye(3), atol=1e-6)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_kabsch_not_worse_than_identity(seed):
    rng = np.random.default_rng(seed)
    x, y = rng.normal(size=(10, 3)), rng.normal(size=(10, 3))
    tr = kabsch_align(x, y)
    fitted = np.sum((tr.apply(x) - y) ** 2)
    assert fitted <= np.sum((x - y) ** 2) + 1e-9
    # centroid alignment alone is also a rigid candidate
    assert fitted <= np.sum((x - x.mean(0) + y.mean(0) - y) ** 2) + 1e-9
    assert np.linalg.det(tr.rotation) == pytest.approx(1.0, abs=1e-6)


def test_kabsch_collinear_rejected():
    x = np.outer(np.arange(5.0), [1.0, 2.0, 3.0])
    with pytest.raises(DegenerateGeometryError):
        kabsch_align(x, x)
    with pytest.raises(DegenerateGeometryError):
        kabsch_align(x[:2], x[:2])


def test_rigid_transform_algebra():
    rng = np.random.default_rng(3)
    x = rng.normal(size=(8, 3))
    a = kabsch_align(x, x @ random_rotation(rng).T + 1)
    b = kabsch_align(x, x @ random_rotation(rng).T - 2)
    np.testing.assert_allclose(a.compose(b).apply(x), a.apply(b.apply(x)), atol=1e-12)
    np.testing.assert_allclose(a.inverse().apply(a.apply(x)), x, atol=1e-12)


# -- rasterisation and sampling -------------------------------------------------

def single_triangle_mesh():
    uv = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], np.float32)
    verts = np.array([[0.1, -0.2, 0.3], [1.5, 0.4, -0.7], [-0.3, 2.0, 0.9]], np.float32)
    f = np.array([[0, 1, 2]])
    return TriMesh(verts, f, uv, f.copy())


def test_single_triangle_barycentric_probes():
    mesh = single_triangle_mesh()
    pm = rasterize_position_map(mesh, 256)
    v = mesh.vertices.astype(np.float64)
    for i, j in [(0, 0), (10, 200), (100, 100), (200, 30), (127, 127)]:
        u, w = (j + 0.5) / 256, (i + 0.5) / 256
        assert pm.mask[i, j] == 1
        expect = (1 - u - w) * v[0] + u * v[1] + w * v[2]
        np.testing.assert_allclose(pm.data[i, j], expect, atol=1e-6)
    # beyond the hypotenuse
    assert pm.mask[255, 255] == 0 and np.all(pm.data[255, 255] == 0.0)
    assert pm.mask[200, 100] == 0


def smooth_mesh(seed, n=30):
    rng = np.random.default_rng(seed)
    base = grid_mesh(n, n)
    x, y = base.vertices[:, 0].astype(np.float64), base.vertices[:, 1].astype(np.float64)
    a, b, c = rng.uniform(0.5, 2.0, 3)
    z = 0.1 * np.sin(a * x + b) * np.cos(c * y) + 0.05 * x * y
    verts = np.column_stack([0.2 * x, 0.25 * y, z]) + rng.normal(size=3)
    return base.with_vertices(verts)


def test_translation_moves_every_masked_texel():
    mesh = smooth_mesh(0)
    t = np.array([0.3, -1.0, 2.0])
    a = rasterize_position_map(mesh)
    b = rasterize_position_map(mesh.with_vertices(mesh.vertices + t))
    m = a.mask.astype(bool)
    np.testing.assert_array_equal(a.mask, b.mask)
    np.testing.assert_allclose(b.data[m] - a.data[m], np.broadcast_to(t, (m.sum(), 3)), atol=1e-5)
    assert np.all(b.data[~m] == 0.0)


@pytest.mark.parametrize("seed", range(5))
def test_roundtrip_interior_vertices(seed):
    mesh = smooth_mesh(seed)
    pm = rasterize_position_map(mesh)
    out = sample_vertices(pm, mesh)
    assert out.missing.size == 0
    n = 30
    grid = np.arange(n * n).reshape(n, n)
    interior = grid[1:-1, 1:-1].ravel()
    err = rms(out.vertices[interior] - mesh.vertices[interior])
    assert err < 1e-3 * mesh.bbox_diagonal()


def test_constant_map_and_texel_centre():
    mesh = grid_mesh(5, 5)
    pm = PositionMap(np.full((16, 16, 3), 0.25, np.float32), np.ones((16, 16), np.uint8))
    np.testing.assert_allclose(sample_vertices(pm, mesh).vertices, 0.25, atol=1e-7)
    data = np.random.default_rng(0).normal(size=(16, 16, 3)).astype(np.float32)
    uv = np.array([[(3 + 0.5) / 16, (7 + 0.5) / 16], [0.9, 0.9], [0.9, 0.1]], np.float32)
    f = np.array([[0, 1, 2]])
    probe = TriMesh(np.zeros((3, 3), np.float32), f, uv, f.copy())
    got = sample_vertices(PositionMap(data, np.ones((16, 16), np.uint8)), probe).vertices
    np.testing.assert_allclose(got[0], data[7, 3], atol=1e-6)


def test_mask_weighted_renormalisation_and_missing():
    data = np.zeros((4, 4, 3), np.float32)
    data[1, 1] = 2.0
    data[1, 2] = 100.0
    mask = np.zeros((4, 4), np.uint8)
    mask[1, 1] = 1
    uv = np.array([[2.0 / 4, 1.5 / 4], [0.1, 0.95], [0.05, 0.9]], np.float32)
    f = np.array([[0, 1, 2]])
    tmpl = TriMesh(np.full((3, 3), 7.0, np.float32), f, uv, f.copy())
    out = sample_vertices(PositionMap(data, mask), tmpl)
    np.testing.assert_allclose(out.vertices[0], 2.0)      # unmasked 100 never leaks in
    assert set(out.missing.tolist()) == {1, 2}
    np.testing.assert_array_equal(out.vertices[1:], 7.0)


def test_overlap_warning():
    uv = np.array([[0.1, 0.1], [0.9, 0.1], [0.1, 0.9]])
    f = np.array([[0, 1, 2], [0, 1, 2]])
    with pytest.warns(UVOverlapWarning):
        plan = build_raster_plan(uv, f, 32)
    assert np.all(plan.face_index[plan.face_index >= 0] == 0)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        build_raster_plan(uv, f[:1], 32)


def test_raster_rejects_degenerate_and_out_of_chart():
    f = np.array([[0, 1, 2]])
    with pytest.raises(DegenerateGeometryError):
        build_raster_plan(np.array([[0.1, 0.1], [0.5, 0.5], [0.9, 0.9]]), f, 16)
    with pytest.raises(DegenerateGeometryError):
        build_raster_plan(np.array([[0.1, 0.1], [1.5, 0.1], [0.1, 0.9]]), f, 16)


# -- Laplacian ------------------------------------------------------------------

def brute_laplacian(x, mask):
    h, w, _ = x.shape
    out = np.zeros_like(x)
    for i in range(h):
        for j in range(w):
            if not mask[i, j]:
                continue
            total = -4 * x[i, j]
            for di, dj in ((-1, 0), (1, 0), (0, -1), (0, 1)):
                a, b = i + di, j + dj
                inside = 0 <= a < h and 0 <= b < w and mask[a, b]
                total = total + (x[a, b] if inside else x[i, j])
            out[i, j] = total
    return out


def test_laplacian_matches_brute_force():
    rng = np.random.default_rng(0)
    for _ in range(10):
        x = rng.normal(size=(5, 5, 3))
        mask = rng.random((5, 5)) > 0.3
        np.testing.assert_allclose(image_laplacian(x, mask), brute_laplacian(x, mask), atol=1e-12)


def test_laplacian_constant_and_ramp():
    np.testing.assert_array_equal(image_laplacian(np.full((8, 9, 2), 3.0)), 0.0)
    i, j = np.mgrid[0:10, 0:12]
    ramp = (2.0 * i - 0.5 * j)[..., None]
    lap = image_laplacian(ramp)
    np.testing.assert_allclose(lap[1:-1, 1:-1], 0.0, atol=1e-12)


# -- shape basis ----------------------------------------------------------------

def basis_problem(seed, v=60, d=8):
    rng = np.random.default_rng(seed)
    return rng.normal(size=(v, 3)), rng.normal(size=(v, 3, d)), rng.normal(size=d)


def test_fit_shape_basis_recovers_coefficients():
    mean, basis, beta = basis_problem(0)
    obs = mean + basis @ beta
    got = fit_shape_basis(np.arange(60), obs, mean, basis)
    np.testing.assert_allclose(got, beta, atol=1e-6)
    partial = np.arange(0, 60, 7)
    np.testing.assert_allclose(fit_shape_basis(partial, obs[partial], mean, basis), beta, atol=1e-6)


def test_fit_shape_basis_mean_gives_zero():
    mean, basis, _ = basis_problem(1)
    np.testing.assert_allclose(fit_shape_basis(np.arange(60), mean, mean, basis), 0.0, atol=1e-9)


def test_fit_shape_basis_underdetermined():
    mean, basis, _ = basis_problem(2)
    with pytest.raises(RankError) as exc:
        fit_shape_basis([3], mean[[3]], mean, basis)
    assert exc.value.deficiency == 5
    basis[:, :, 1] = basis[:, :, 0]
    with pytest.raises(RankError):
        fit_shape_basis(np.arange(60), mean, mean, basis)


# -- Laplacian deformation --------------------------------------------------------

def bumpy(n=15):
    base = grid_mesh(n, n)
    x, y = base.vertices[:, 0].astype(np.float64), base.vertices[:, 1].astype(np.float64)
    return base.with_vertices(np.column_stack([x, y, 0.1 * np.sin(3 * x) * np.cos(2 * y)]))


def test_deform_identity_constraints():
    mesh = bumpy()
    idx = np.arange(0, mesh.n_vertices, 5)
    out = laplacian_deform(mesh, (idx, mesh.vertices[idx]))
    assert np.abs(out.vertices - mesh.vertices).max() < 1e-6


def test_deform_translation_equivariant():
    mesh = bumpy()
    idx = np.arange(0, mesh.n_vertices, 9)
    t = np.array([0.2, -0.1, 0.05])
    out = laplacian_deform(mesh, {int(i): mesh.vertices[i] + t for i in idx})
    np.testing.assert_allclose(out.vertices - mesh.vertices, np.broadcast_to(t, mesh.vertices.shape), atol=1e-6)


def test_deform_constraints_hit_targets_and_interpolate():
    mesh = bumpy()
    v = mesh.vertices.astype(np.float64)
    disp = np.column_stack([0.03 * v[:, 1] ** 2, 0.02 * np.sin(2 * v[:, 0]), 0.05 * v[:, 0] * v[:, 1]])
    oracle = v + disp
    n = 15
    ii, jj = np.divmod(np.arange(mesh.n_vertices), n)
    constrained = np.flatnonzero((ii + jj) % 2 == 0)
    free = np.setdiff1d(np.arange(mesh.n_vertices), constrained)
    out = laplacian_deform(mesh, (constrained, oracle[constrained]), weight=1e3).vertices
    assert np.abs(out[constrained] - oracle[constrained]).max() < 1e-3
    assert rms(out[free] - oracle[free]) < 0.05 * rms(disp[free])


def test_deform_permutation_equivariant():
    mesh = bumpy(8)
    rng = np.random.default_rng(4)
    perm = rng.permutation(mesh.n_vertices)
    inv = np.argsort(perm)
    relabelled = TriMesh(mesh.vertices[perm], inv[mesh.faces], mesh.uv, mesh.uv_faces)
    idx = np.array([0, 7, 30, 63, 40])
    tgt = mesh.vertices[idx] + rng.normal(scale=0.05, size=(5, 3))
    a = laplacian_deform(mesh, (idx, tgt)).vertices
    b = laplacian_deform(relabelled, (inv[idx], tgt)).vertices
    np.testing.assert_allclose(b, a[perm], atol=1e-6)


def test_deform_rejects_collinear_constraints():
    mesh = bumpy(6)
    with pytest.raises(DegenerateGeometryError):
        laplacian_deform(mesh, ([0, 1, 2], mesh.vertices[[0, 1, 2]] * [1, 0, 0]))
    with pytest.raises(DegenerateGeometryError):
        laplacian_deform(mesh, ([0, 7], mesh.vertices[[0, 7]]))


# -- face frames ----------------------------------------------------------------

def test_unit_right_triangle_frame():
    f = np.array([[0, 1, 2]])
    mesh = TriMesh(np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0]], np.float32), f,
                   np.zeros((3, 2), np.float32), f.copy())
    fr = face_frame(mesh, 0)
    np.testing.assert_allclose(fr.R, np.eye(3), atol=1e-12)
    np.testing.assert_allclose(fr.T, [1 / 3, 1 / 3, 0], atol=1e-7)
    assert fr.k == pytest.approx(1.0)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**31 - 1), st.floats(0.1, 10.0))
def test_face_frame_equivariance(seed, s):
    rng = np.random.default_rng(seed)
    v = rng.normal(size=(3, 3))
    f = np.array([[0, 1, 2]])
    if 0.5 * np.linalg.norm(np.cross(v[1] - v[0], v[2] - v[0])) < 1e-3:
        return
    r0, t0 = random_rotation(rng), rng.normal(size=3)
    rot, cen, k = face_frames(v, f)
    rot2, cen2, k2 = face_frames(v @ r0.T + t0, f)
    np.testing.assert_allclose(rot2[0], r0 @ rot[0], atol=1e-9)
    np.testing.assert_allclose(cen2[0], r0 @ cen[0] + t0, atol=1e-9)
    assert k2[0] == pytest.approx(k[0], rel=1e-9)
    rot3, _, k3 = face_frames(v * s, f)
    np.testing.assert_allclose(rot3[0], rot[0], atol=1e-9)
    assert k3[0] == pytest.approx(s * k[0], rel=1e-9)
    assert np.linalg.det(rot[0]) == pytest.approx(1.0)


def test_degenerate_face_rejected():
    f = np.array([[0, 1, 2]])
    mesh = TriMesh(np.array([[0, 0, 0], [1, 1, 1], [2, 2, 2]], np.float32), f, np.zeros((3, 2), np.float32), f)
    with pytest.raises(DegenerateGeometryError):
        face_frame(mesh, 0)
    with pytest.raises(DegenerateGeometryError):
        mesh.validate()


# -- file formats -----------------------------------------------------------------

def test_obj_roundtrip(tmp_path):
    mesh = smooth_mesh(3, n=6)
    p = tmp_path / "m.obj"
    write_obj(p, mesh)
    text = p.read_text()
    assert text.startswith("v ") and "\nvt " in text and "\nf 1/1 2/2 " in text
    back = read_obj(p)
    np.testing.assert_array_equal(back.vertices, mesh.vertices)
    np.testing.assert_array_equal(back.uv, mesh.uv)
    np.testing.assert_array_equal(back.faces, mesh.faces)
    write_obj(tmp_path / "n.obj", back)
    assert (tmp_path / "n.obj").read_text() == text
    (tmp_path / "bad.obj").write_text("v 0 0 0\nf 1 2 3 4\n")
    with pytest.raises(DataError):
        read_obj(tmp_path / "bad.obj")


def test_pmap_roundtrip(tmp_path):
    pm = rasterize_position_map(smooth_mesh(1), 64)
    p = tmp_path / "a.pmap"
    write_pmap(p, pm)
    blob = p.read_bytes()
    assert blob[:4] == b"PMAP" and len(blob) == 12 + 64 * 64 * 12 + 64 * 64
    back = read_pmap(p)
    np.testing.assert_array_equal(back.data, pm.data)
    np.testing.assert_array_equal(back.mask, pm.mask)
    (tmp_path / "b.pmap").write_bytes(blob[:-1])
    with pytest.raises(DataError):
        read_pmap(tmp_path / "b.pmap")
