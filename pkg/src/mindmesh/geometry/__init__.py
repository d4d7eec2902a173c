"""Meshes, rigid alignment, UV position maps, deformation and face frames."""

from .deform import (
    conjugate_gradient,
    fit_shape_basis,
    laplacian_deform,
    uniform_laplacian,
)
from .frames import FaceFrame, face_frame, face_frames
from .kabsch import (
    RigidTransform,
    kabsch_align,
    random_rotation,
    rotation_from_axis_angle,
)
from .mesh import TriMesh, grid_mesh, read_obj, write_obj
from .posmap import (
    RESOLUTION,
    SENTINEL,
    PositionMap,
    RasterPlan,
    SampledVertices,
    UVOverlapWarning,
    build_raster_plan,
    image_laplacian,
    neighbour_weights,
    raster_plan_for,
    rasterize_position_map,
    read_pmap,
    sample_vertices,
    write_pmap,
)

__all__ = [
    "RESOLUTION", "SENTINEL", "FaceFrame", "PositionMap", "RasterPlan", "RigidTransform",
    "SampledVertices", "TriMesh", "UVOverlapWarning", "build_raster_plan", "conjugate_gradient",
    "face_frame", "face_frames", "fit_shape_basis", "grid_mesh", "image_laplacian", "kabsch_align",
    "laplacian_deform", "neighbour_weights", "random_rotation", "raster_plan_for",
    "rasterize_position_map", "read_obj", "read_pmap", "rotation_from_axis_angle", "sample_vertices",
    "uniform_laplacian", "write_obj", "write_pmap",
]
