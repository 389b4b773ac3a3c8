"""Object <-> camera frame transforms.

The object frame has its origin at the centroid and is rotated about the
camera y axis by the horizontal viewing angle, so its +z axis points along the
viewing ray: ``p_C = R_y(alpha_h) @ p_O + T``.
"""

import math
from dataclasses import dataclass

import numpy as np

from .grid import CAMERA, LOCAL


def rot_y(angle):
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rot_y_derivative(angle):
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[-s, 0.0, c], [0.0, 0.0, 0.0], [-c, 0.0, -s]])


@dataclass(frozen=True)
class FrameTransform:
    R: np.ndarray
    T: np.ndarray
    alpha_h: float

    @property
    def matrix(self):
        m = np.eye(4)
        m[:3, :3] = self.R
        m[:3, 3] = self.T
        return m

    def inverse_matrix(self):
        m = np.eye(4)
        m[:3, :3] = self.R.T
        m[:3, 3] = -self.R.T @ self.T
        return m

    def apply(self, points):
        return np.asarray(points) @ self.R.T + self.T

    def apply_inverse(self, points):
        return (np.asarray(points) - self.T) @ self.R


def build_T_CO(centroid, alpha_h):
    return FrameTransform(rot_y(alpha_h), np.asarray(centroid, dtype=np.float64).copy(),
                          float(alpha_h))


def local_to_camera(grid, transform):
    grid.expect_frame(LOCAL)
    pts = np.where(grid.mask[..., None], transform.apply(grid.points), 0.0)
    return grid.with_points(pts, CAMERA)


def camera_to_local(grid, transform):
    grid.expect_frame(CAMERA)
    pts = np.where(grid.mask[..., None], transform.apply_inverse(grid.points), 0.0)
    return grid.with_points(pts, LOCAL)
