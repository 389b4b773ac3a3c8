"""Per-instance training data from a dense depth map.

depth map -> camera-frame scene tensor -> points inside a ground-truth box ->
48x48 nearest-pixel instance grid (camera frame) -> object-frame grid.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .camera import backproject, viewing_angles
from .errors import EmptyDepth, EmptyInstance
from .frames import build_T_CO, camera_to_local
from .grid import CAMERA, InstanceGrid
from .kitti_io import DepthMap

GRID_SIZE = (48, 48)
K_MIN = 8
# floating slack on box faces, so points lying exactly on a face stay inside
CONTAINMENT_EPS = 1e-9


@dataclass
class SceneTensor:
    """(height, width, 3) camera-frame points; invalid cells are NaN."""

    points: np.ndarray

    @property
    def valid(self):
        return np.isfinite(self.points[..., 2])

    @property
    def shape(self):
        return self.points.shape[:2]


@dataclass
class InstancePoints:
    pixels: np.ndarray   # (K, 2) int (row, col)
    points: np.ndarray   # (K, 3)

    def __len__(self):
        return len(self.pixels)


def densify_depth(sparse):
    """Fill invalid pixels with the depth of the nearest valid pixel."""
    valid = sparse.valid
    if not valid.any():
        raise EmptyDepth("depth map has no valid pixels")
    if valid.all():
        return DepthMap(sparse.depth.copy())
    _, (rows, cols) = ndimage.distance_transform_edt(~valid, return_indices=True)
    return DepthMap(sparse.depth[rows, cols])


def pixel_centers(height, width):
    cols, rows = np.meshgrid(np.arange(width) + 0.5, np.arange(height) + 0.5)
    return np.stack([cols, rows], axis=-1)


def depth_to_scene(depth, camera):
    z = depth.depth
    valid = depth.valid
    pts = np.full(z.shape + (3,), np.nan)
    if valid.any():
        pts[valid] = backproject(camera, pixel_centers(*z.shape)[valid], z[valid])
    return SceneTensor(pts)


def points_in_box(points, box, margin=0.0):
    """Boolean mask of ``points`` (..., 3) inside the yaw-rotated box grown by ``margin``."""
    c, s = math.cos(box.yaw), math.sin(box.yaw)
    d = np.asarray(points) - box.t
    # inverse yaw rotation into the box frame
    local = np.stack([c * d[..., 0] - s * d[..., 2], d[..., 1], s * d[..., 0] + c * d[..., 2]], -1)
    half = 0.5 * np.asarray(box.dims) + margin + CONTAINMENT_EPS
    with np.errstate(invalid="ignore"):
        return np.all(np.abs(local) <= half, axis=-1)


def segment_instance(scene, gt, margin=0.0):
    inside = points_in_box(scene.points, gt, margin) & scene.valid
    rows, cols = np.nonzero(inside)
    if rows.size == 0:
        raise EmptyInstance(f"no scene points inside the {gt.cls} box")
    return InstancePoints(np.stack([rows, cols], axis=1), scene.points[rows, cols])


def grid_source_pixels(box, size=GRID_SIZE):
    """Source pixel (row, col) for every grid cell.

    Each cell center maps into the box; a center landing exactly on a pixel
    edge picks the pixel with the smaller index.
    """
    L, W = size
    u = box.u1 + (np.arange(W) + 0.5) * (box.width / W)
    v = box.v1 + (np.arange(L) + 0.5) * (box.height / L)
    cols = np.ceil(u).astype(np.int64) - 1
    rows = np.ceil(v).astype(np.int64) - 1
    return np.meshgrid(rows, cols, indexing="ij")


def make_instance_grid(instance, box, size=GRID_SIZE):
    rows, cols = grid_source_pixels(box, size)
    G = np.stack([cols + 0.5, rows + 0.5], axis=-1).astype(np.float64)
    width = int(max(instance.pixels[:, 1].max(), cols.max())) + 2
    keys = instance.pixels[:, 0] * width + instance.pixels[:, 1]
    order = np.argsort(keys)
    sorted_keys = keys[order]
    cell_keys = rows * width + cols
    pos = np.clip(np.searchsorted(sorted_keys, cell_keys), 0, len(sorted_keys) - 1)
    mask = (sorted_keys[pos] == cell_keys) & (rows >= 0) & (cols >= 0)
    points = np.zeros(size + (3,))
    points[mask] = instance.points[order[pos[mask]]]
    return InstanceGrid(points, mask, G, CAMERA, box)


def grid_to_local(grid, gt, alpha_h):
    return camera_to_local(grid, build_T_CO(gt.t, alpha_h))


def generate_instance(scene, camera, box2d, box3d, margin=0.0, size=GRID_SIZE, k_min=K_MIN):
    """Camera- and local-frame grids for one labelled object.

    Raises EmptyInstance when fewer than ``k_min`` grid cells are valid.
    """
    grid = make_instance_grid(segment_instance(scene, box3d, margin), box2d, size)
    if grid.count < k_min:
        raise EmptyInstance(f"only {grid.count} valid cells (need {k_min})")
    alpha_h = viewing_angles(camera, box2d).alpha_h
    return grid, grid_to_local(grid, box3d, alpha_h)
