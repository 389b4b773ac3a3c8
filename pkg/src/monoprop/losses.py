"""Training losses with analytic gradients.

Pose gradients are taken with respect to ``(t_x, t_y, t_z, alpha_h)`` and can be
chained to the refinement offsets ``(dt_y, dt_z, alpha_h)`` with
:meth:`LossTerm.offsets_gradient`, where ``t_x`` follows the 2D box-center ray
(``dt_x/dt_z = ray_dx_dz``). All smooth-L1 terms use ``delta = 1`` and are
means over the valid elements.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .camera import encode_angle_bins
from .errors import DimensionMismatch, MaskMismatch, NonFiniteTerm, PointBehindCamera
from .frames import rot_y_derivative
from .grid import LOCAL

DELTA = 1.0
MIN_PROJ_DEPTH = 1e-3
TERM_NAMES = ("centroid", "orientation", "dimension", "local", "z", "proj")


def smooth_l1(x, delta=DELTA):
    """Elementwise smooth L1; returns ``(value, derivative)``."""
    x = np.asarray(x, dtype=np.float64)
    ax = np.abs(x)
    quad = ax < delta
    value = np.where(quad, 0.5 * x * x / delta, ax - 0.5 * delta)
    grad = np.where(quad, x / delta, np.sign(x))
    if value.ndim == 0:
        return float(value), float(grad)
    return value, grad


@dataclass
class LossTerm:
    value: float
    grad_pose: np.ndarray = field(default_factory=lambda: np.zeros(4))
    grad_points: np.ndarray | None = None
    extra: dict = field(default_factory=dict)

    def offsets_gradient(self, ray_dx_dz=0.0):
        g = self.grad_pose
        return np.array([g[1], g[2] + ray_dx_dz * g[0], g[3]])


@dataclass(frozen=True)
class LossWeights:
    w_t: float = 1.0
    w_theta: float = 1.0
    w_dim: float = 1.0
    w_local: float = 1.0
    w_z: float = 1.0
    w_proj: float = 1.0

    def __post_init__(self):
        ws = self.as_dict().values()
        if any(w < 0 for w in ws) or not any(w > 0 for w in ws):
            raise ValueError("weights must be non-negative with at least one positive")

    def as_dict(self):
        return {"centroid": self.w_t, "orientation": self.w_theta, "dimension": self.w_dim,
                "local": self.w_local, "z": self.w_z, "proj": self.w_proj}


@dataclass
class LossReport:
    total: float
    terms: dict
    gradient: np.ndarray                 # (dt_y, dt_z, alpha_h)
    point_gradient: np.ndarray | None = None

    def to_text(self):
        lines = [f"total={self.total:.9g}"]
        lines += [f"{k}={v:.9g}" for k, v in self.terms.items()]
        lines += [f"grad_{k}={g:.9g}" for k, g in zip(("dt_y", "dt_z", "alpha_h"), self.gradient)]
        return "\n".join(lines) + "\n"


def centroid_loss(pred_offsets, target_offsets, delta=DELTA):
    diff = np.asarray(pred_offsets, dtype=np.float64) - np.asarray(target_offsets, dtype=np.float64)
    value, grad = smooth_l1(diff, delta)
    return LossTerm(float(value.sum()), np.array([0.0, grad[0], grad[1], 0.0]))


def orientation_loss(logits, residuals, target_beta, delta=DELTA):
    """Softmax cross-entropy over angle bins plus smooth L1 on the target bin's residual."""
    logits = np.asarray(logits, dtype=np.float64)
    residuals = np.asarray(residuals, dtype=np.float64)
    n = logits.shape[0]
    if residuals.shape != (n,) or n < 2:
        raise DimensionMismatch(f"{n} logits vs residuals of shape {residuals.shape}")
    k, target_res = encode_angle_bins(target_beta, n)
    lse = logsumexp(logits)
    ce = lse - logits[k]
    reg, dreg = smooth_l1(residuals[k] - target_res, delta)
    g_logits = np.exp(logits - lse)
    g_logits[k] -= 1.0
    g_res = np.zeros(n)
    g_res[k] = dreg
    return LossTerm(float(ce + reg), extra={"classification": float(ce), "regression": reg,
                                            "logits": g_logits, "residuals": g_res})


def dimension_loss(pred_dims, target_dims, delta=DELTA):
    value, grad = smooth_l1(np.asarray(pred_dims, float) - np.asarray(target_dims, float), delta)
    return LossTerm(float(value.sum()), extra={"dims": grad})


def dimension_loss_offsets(pred_offsets, class_mean, target_dims, delta=DELTA):
    """Same loss written on offsets from the class mean size."""
    mean = np.asarray(class_mean, float)
    target_off = np.asarray(target_dims, float) - mean
    value, grad = smooth_l1(np.asarray(pred_offsets, float) - target_off, delta)
    return LossTerm(float(value.sum()), extra={"offsets": grad})


def class_mean_dims(boxes):
    """Mean (d_x, d_y, d_z) per class over an iterable of Box3D."""
    sums, counts = {}, {}
    for b in boxes:
        sums[b.cls] = sums.get(b.cls, np.zeros(3)) + np.asarray(b.dims)
        counts[b.cls] = counts.get(b.cls, 0) + 1
    return {c: tuple(sums[c] / counts[c]) for c in sums}


def _check_mask(mask):
    k = int(mask.sum())
    if k == 0:
        raise MaskMismatch("no valid cells")
    return k


def local_pc_loss(pred, gt, delta=DELTA):
    pred.expect_frame(LOCAL)
    gt.expect_frame(LOCAL)
    if not np.array_equal(pred.mask, gt.mask):
        raise MaskMismatch("prediction and target masks differ")
    k = _check_mask(gt.mask)
    value, grad = smooth_l1(pred.points[gt.mask] - gt.points[gt.mask], delta)
    gp = np.zeros_like(pred.points)
    gp[gt.mask] = grad / (3 * k)
    return LossTerm(float(value.sum() / (3 * k)), grad_points=gp)


def _pose_term(value, g_cam, p_local, transform, mask, shape):
    """Chain a per-point camera-frame gradient into pose and local-point gradients."""
    grad_T = g_cam.sum(axis=0)
    dR = rot_y_derivative(transform.alpha_h)
    grad_alpha = float(np.einsum("ki,ij,kj->", g_cam, dR, p_local))
    gp = np.zeros(shape + (3,))
    gp[mask] = g_cam @ transform.R
    return LossTerm(float(value), np.array([*grad_T, grad_alpha]), gp)


def z_loss(pred, transform, gt_depth, mask=None, delta=DELTA):
    """Smooth L1 between the camera-frame z of the transformed prediction and the
    instance depth map, averaged over valid cells."""
    pred.expect_frame(LOCAL)
    mask = pred.mask if mask is None else np.asarray(mask, bool)
    k = _check_mask(mask)
    p = pred.points[mask]
    z = p @ transform.R[2] + transform.T[2]
    value, dz = smooth_l1(z - np.asarray(gt_depth)[mask], delta)
    g_cam = np.zeros_like(p)
    g_cam[:, 2] = dz / k
    return _pose_term(value.sum() / k, g_cam, p, transform, mask, mask.shape)


def project_points(camera, p_cam):
    if p_cam.size and p_cam[:, 2].min() <= MIN_PROJ_DEPTH:
        raise PointBehindCamera("transformed instance point behind the camera")
    h = p_cam @ camera.P[:, :3].T + camera.P[:, 3]
    return h[:, :2] / h[:, 2:3], h[:, 2]


def projection_errors(pred, transform, camera, G=None, box=None, mask=None):
    """Box-normalized pixel residuals (G - H) / (b_w, b_h) of the valid cells."""
    mask = pred.mask if mask is None else np.asarray(mask, bool)
    G = pred.G if G is None else np.asarray(G)
    box = pred.box if box is None else box
    p_cam = transform.apply(pred.points[mask])
    H, w = project_points(camera, p_cam)
    scale = np.array([box.width, box.height])
    return (G[mask] - H) / scale, H, w, p_cam, scale


def projection_loss(pred, transform, camera, G=None, box=None, mask=None, delta=DELTA):
    """Projection alignment loss.

    The predicted local grid is placed with ``transform``, projected through the
    full camera matrix, and compared against the expected pixels ``G``.
    Residuals are divided by the 2D box width/height and penalized per
    coordinate with smooth L1; the value is the mean over the 2K residuals.
    """
    pred.expect_frame(LOCAL)
    mask = pred.mask if mask is None else np.asarray(mask, bool)
    k = _check_mask(mask)
    e, H, w, _, scale = projection_errors(pred, transform, camera, G, box, mask)
    value, de = smooth_l1(e, delta)
    # d value / d H, then through the perspective division
    dH = -de / scale / (2 * k)
    P = camera.P
    du = (P[0, :3][None, :] - H[:, :1] * P[2, :3][None, :]) / w[:, None]
    dv = (P[1, :3][None, :] - H[:, 1:2] * P[2, :3][None, :]) / w[:, None]
    g_cam = dH[:, :1] * du + dH[:, 1:2] * dv
    return _pose_term(value.sum() / (2 * k), g_cam, pred.points[mask], transform, mask,
                      mask.shape)


def total_loss(terms, weights, ray_dx_dz=0.0):
    """Weighted sum of named :class:`LossTerm` values; missing terms count as zero."""
    w = weights.as_dict()
    unknown = set(terms) - set(w)
    if unknown:
        raise KeyError(f"unknown loss terms {sorted(unknown)}")
    total = 0.0
    grad = np.zeros(3)
    point_grad = None
    values = {}
    for name in TERM_NAMES:
        if name not in terms:
            continue
        term = terms[name]
        if not math.isfinite(term.value):
            raise NonFiniteTerm(f"{name} loss is {term.value}")
        values[name] = term.value
        total += w[name] * term.value
        grad += w[name] * term.offsets_gradient(ray_dx_dz)
        if term.grad_points is not None:
            contrib = w[name] * term.grad_points
            point_grad = contrib if point_grad is None else point_grad + contrib
    return LossReport(total, values, grad, point_grad)
