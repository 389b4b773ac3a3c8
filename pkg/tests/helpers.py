"""Random configurations shared by the gradient tests and the acceptance suite."""

import math
from dataclasses import dataclass

import numpy as np

from monoprop.camera import pixel_ray, project
from monoprop.frames import build_T_CO
from monoprop.grid import LOCAL, InstanceGrid
from monoprop.kitti_io import Box2D, CameraModel

FD_STEP = 1e-5


@dataclass
class PoseConfig:
    camera: CameraModel
    grid: InstanceGrid
    gt_depth: np.ndarray
    centroid: np.ndarray
    alpha_h: float
    ray_dx_dz: float

    def transform(self, params):
        """Pose from offsets ``(dt_y, dt_z, alpha_h)`` with t_x sliding along the ray."""
        dt_y, dt_z, alpha = params
        c = self.centroid + np.array([self.ray_dx_dz * dt_z, dt_y, dt_z])
        return build_T_CO(c, alpha)


def random_camera(rng):
    f = rng.uniform(600, 1000)
    return CameraModel(np.array([[f, 0, rng.uniform(500, 700), rng.uniform(-50, 50)],
                                 [0, f * rng.uniform(0.9, 1.1), rng.uniform(150, 200),
                                  rng.uniform(-1, 1)],
                                 [0, 0, 1, rng.uniform(-0.01, 0.01)]]))


def random_pose_config(rng, shape=(12, 12)):
    camera = random_camera(rng)
    dims = rng.uniform([1, 1, 1], [4.5, 2, 2])
    mask = rng.random(shape) < 0.8
    mask[0, 0] = True
    local = np.where(mask[..., None], rng.uniform(-0.5, 0.5, shape + (3,)) * dims, 0.0)
    z = rng.uniform(6, 60)
    u_c = rng.uniform(200, 1000)
    ray = pixel_ray(camera, (u_c, rng.uniform(150, 250)))
    alpha = math.atan2(ray.at(z)[0], z)
    centroid = ray.at(z)
    t_true = build_T_CO(centroid, alpha)
    cam_pts = t_true.apply(local[mask])
    uv = project(camera, cam_pts)
    G = np.zeros(shape + (2,))
    # targets scattered around the true projections so residuals hit both
    # smooth-L1 regimes once normalized by the box size
    G[mask] = uv + rng.normal(0, 25, uv.shape)
    lo, hi = uv.min(axis=0), uv.max(axis=0)
    box = Box2D(lo[0] - 1, lo[1] - 1, hi[0] + 1, hi[1] + 1)
    depth = np.zeros(shape)
    depth[mask] = cam_pts[:, 2] + rng.normal(0, 1.0, len(cam_pts))
    grid = InstanceGrid(local, mask, G, LOCAL, box)
    # evaluate away from the true pose
    start = centroid + np.array([0, rng.uniform(-0.5, 0.5), 0])
    dz = rng.uniform(-3, 3)
    start = start + dz * ray.direction
    return PoseConfig(camera, grid, depth, start, alpha + rng.uniform(-0.2, 0.2),
                      float(ray.direction[0]))


def central_difference(f, x, h=FD_STEP):
    x = np.asarray(x, dtype=np.float64)
    g = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e.flat[i] = h
        g.flat[i] = (f(x + e) - f(x - e)) / (2 * h)
    return g


def gradient_agrees(analytic, numeric, rel=1e-5, abs_tol=1e-8):
    analytic = np.asarray(analytic, float)
    numeric = np.asarray(numeric, float)
    err = np.abs(analytic - numeric)
    return bool(np.all((err <= rel * np.maximum(np.abs(numeric), np.abs(analytic)))
                       | (err <= abs_tol)))


def worst_relative_error(analytic, numeric):
    """Largest relative error over components with a nonzero gradient."""
    err = np.abs(np.asarray(analytic) - np.asarray(numeric))
    scale = np.maximum(np.abs(analytic), np.abs(numeric))
    nz = scale > 0
    return float((err[nz] / scale[nz]).max()) if nz.any() else 0.0
