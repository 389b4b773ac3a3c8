"""Pinhole projection, viewing angles, and proposal initialization.

Pixel convention: pixel ``(col, row)`` covers ``[col, col+1) x [row, row+1)``
in continuous image coordinates, so its center is ``(col + 0.5, row + 0.5)``.
The full 3x4 matrix is used everywhere, including the baseline column.
"""

import math
from dataclasses import dataclass

import numpy as np

from .angles import TWO_PI, normalize_angle
from .errors import BehindCamera, DegenerateBox, NonPositiveDepth

MIN_DEPTH = 1e-6
DEFAULT_NUM_BINS = 12


@dataclass(frozen=True)
class ViewingAngles:
    alpha_h: float
    alpha_v: float


@dataclass(frozen=True)
class Ray:
    """Points on the ray parameterized by camera-frame depth: ``origin + z * direction``
    with ``direction[2] == 1`` and ``origin[2] == 0``."""

    origin: np.ndarray
    direction: np.ndarray

    def at(self, z):
        return self.origin + z * self.direction


@dataclass
class Proposal:
    center: np.ndarray
    box: object
    beta: float
    dims: tuple
    cls: str = "Car"

    def __post_init__(self):
        self.center = np.asarray(self.center, dtype=np.float64)
        if not self.center[2] > 0:
            raise NonPositiveDepth(f"proposal depth {self.center[2]}")


def project(camera, point):
    point = np.asarray(point, dtype=np.float64)
    if point[..., 2].min(initial=np.inf) <= MIN_DEPTH:
        raise BehindCamera("point at or behind the camera plane")
    h = point @ camera.P[:, :3].T + camera.P[:, 3]
    return h[..., :2] / h[..., 2:3]


def pixel_ray(camera, pixel):
    """Ray of all points that project onto ``pixel``, parameterized by depth."""
    P = camera.P
    u, v = float(pixel[0]), float(pixel[1])
    # backproject() is affine in depth; split it into constant and linear parts
    y0 = (v * P[2, 3] - P[1, 3]) / P[1, 1]
    y1 = (v - P[1, 2]) / P[1, 1]
    x0 = (u * P[2, 3] - P[0, 1] * y0 - P[0, 3]) / P[0, 0]
    x1 = (u - P[0, 1] * y1 - P[0, 2]) / P[0, 0]
    return Ray(np.array([x0, y0, 0.0]), np.array([x1, y1, 1.0]))


def backproject(camera, pixel, depth):
    """Camera-frame point at ``depth`` whose projection is ``pixel``.

    Vectorized: ``pixel`` may be (..., 2) and ``depth`` broadcastable to (...).
    """
    depth = np.asarray(depth, dtype=np.float64)
    if depth.size and depth.min() <= 0:
        raise NonPositiveDepth("depth must be positive")
    pixel = np.asarray(pixel, dtype=np.float64)
    P = camera.P
    u, v = pixel[..., 0], pixel[..., 1]
    w = depth + P[2, 3]
    y = (v * w - P[1, 2] * depth - P[1, 3]) / P[1, 1]
    x = (u * w - P[0, 1] * y - P[0, 2] * depth - P[0, 3]) / P[0, 0]
    return np.stack([x, y, np.broadcast_to(depth, x.shape)], axis=-1)


def viewing_angles(camera, box):
    x, y, z = backproject(camera, box.center, 1.0)
    return ViewingAngles(math.atan2(x, z), math.atan2(y, z))


def proposal_depth(f, h, h_hat):
    """Depth from similar triangles: an object of height ``h`` imaged ``h_hat`` px tall."""
    if h_hat < 1.0:
        raise DegenerateBox(f"projected height {h_hat} px is below one pixel")
    return f * h / h_hat


def theta_from_beta(beta, alpha_h):
    """Yaw from observation angle and horizontal viewing angle (KITTI sign convention)."""
    return normalize_angle(beta + alpha_h)


def beta_from_theta(theta, alpha_h):
    return normalize_angle(theta - alpha_h)


def make_proposal(camera, box, dims, beta, cls=None):
    """Single 3D centroid proposal for a 2D detection.

    Depth comes from the object height and the 2D box height through the
    vertical focal length; (p_x, p_y) put the centroid on the box-center ray.
    Returns ``(proposal, theta)``.
    """
    p_z = proposal_depth(camera.fv, dims[1], box.height)
    center = backproject(camera, box.center, p_z)
    alpha_h = viewing_angles(camera, box).alpha_h
    proposal = Proposal(center, box, normalize_angle(beta), tuple(dims),
                        cls if cls is not None else box.cls)
    return proposal, theta_from_beta(beta, alpha_h)


def encode_angle_bins(beta, num_bins=DEFAULT_NUM_BINS):
    """(bin index, residual) with bin ``k`` centered on ``k * 2pi / num_bins``."""
    if num_bins < 2:
        raise ValueError("need at least two bins")
    width = TWO_PI / num_bins
    shifted = (normalize_angle(beta) + 0.5 * width) % TWO_PI
    k = min(int(shifted // width), num_bins - 1)
    return k, shifted - (k * width + 0.5 * width)


def decode_angle_bins(k, residual, num_bins=DEFAULT_NUM_BINS):
    return normalize_angle(k * TWO_PI / num_bins + residual)


def bin_centers(num_bins=DEFAULT_NUM_BINS):
    return np.array([normalize_angle(k * TWO_PI / num_bins) for k in range(num_bins)])
