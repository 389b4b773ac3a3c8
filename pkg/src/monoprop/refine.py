"""Proposal refinement by direct minimization of the reconstruction-consistency losses.

The optimization variables are the centroid offsets ``(dt_y, dt_z)``; ``t_x``
is not free but follows the ray through the 2D box center.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .camera import make_proposal, pixel_ray, theta_from_beta, viewing_angles
from .errors import DivergedNonFinite, MonoPropError, NonPositiveDepth
from .frames import build_T_CO
from .kitti_io import Box3D
from .losses import LossWeights, projection_loss, total_loss, z_loss


@dataclass(frozen=True)
class RefinementOffsets:
    dt_y: float = 0.0
    dt_z: float = 0.0

    def as_array(self):
        return np.array([self.dt_y, self.dt_z])


@dataclass(frozen=True)
class OptimizerConfig:
    max_iters: int = 200
    step_init: float = 1.0
    backtrack: float = 0.5
    grad_tol: float = 1e-8
    loss_tol: float = 0.0
    max_offset: float = 10.0
    min_depth: float = 0.5
    armijo: float = 1e-4
    max_step: float = 1e8
    max_backtracks: int = 80

    def __post_init__(self):
        if self.max_iters < 0:
            raise ValueError("max_iters must be >= 0")
        if not 0 < self.backtrack < 1:
            raise ValueError("backtrack factor must lie in (0, 1)")
        if self.step_init <= 0 or self.max_offset <= 0:
            raise ValueError("step_init and max_offset must be positive")


@dataclass
class RefineResult:
    offsets: RefinementOffsets
    box: Box3D
    trace: list = field(default_factory=list)
    report: object = None
    status: str = "converged"

    @property
    def iterations(self):
        return len(self.trace) - 1

    def trace_text(self):
        return "".join(f"{i} {v:.12g}\n" for i, v in enumerate(self.trace))


def recover_tx(camera, box, t_z):
    """Lateral position of the centroid on the 2D box-center ray at depth ``t_z``."""
    if t_z <= 0:
        raise NonPositiveDepth(f"depth {t_z}")
    return float(pixel_ray(camera, box.center).at(t_z)[0])


class PoseObjective:
    """``w_z * z_loss + w_proj * projection_loss`` as a function of ``(dt_y, dt_z)``."""

    def __init__(self, proposal, local_grid, camera, weights, gt_depth=None, alpha_h=None):
        if weights.w_z > 0 and gt_depth is None:
            raise ValueError("z loss enabled but no instance depth grid given")
        self.proposal = proposal
        self.grid = local_grid
        self.camera = camera
        self.weights = weights
        self.gt_depth = gt_depth
        self.ray = pixel_ray(camera, proposal.box.center)
        self.alpha_h = (viewing_angles(camera, proposal.box).alpha_h
                        if alpha_h is None else alpha_h)

    def centroid(self, offsets):
        # slide along the box-center ray direction from the proposal, so zero
        # offsets reproduce the proposal even if it sits slightly off the ray
        p = self.proposal.center
        return np.array([p[0] + self.ray.direction[0] * offsets[1], p[1] + offsets[0],
                         p[2] + offsets[1]])

    def report(self, offsets):
        transform = build_T_CO(self.centroid(offsets), self.alpha_h)
        terms = {}
        if self.weights.w_z > 0:
            terms["z"] = z_loss(self.grid, transform, self.gt_depth)
        if self.weights.w_proj > 0:
            terms["proj"] = projection_loss(self.grid, transform, self.camera)
        return total_loss(terms, self.weights, self.ray.direction[0])

    def __call__(self, offsets):
        rep = self.report(offsets)
        return rep.total, rep.gradient[:2]


def _safe_eval(objective, x):
    try:
        return objective(x)
    except MonoPropError:
        return math.inf, None


def refine_pose(proposal, local_grid, camera, weights=None, cfg=None, gt_depth=None,
                alpha_h=None):
    """Projected gradient descent with Armijo backtracking over ``(dt_y, dt_z)``.

    Each iteration starts from the previous step size grown by ``1 / backtrack``
    and shrinks it until the sufficient-decrease test passes, so accepted losses
    never increase. Offsets are kept within ``max_offset`` and the refined depth
    above ``min_depth``.
    """
    weights = weights or LossWeights()
    cfg = cfg or OptimizerConfig()
    objective = PoseObjective(proposal, local_grid, camera, weights, gt_depth, alpha_h)
    p_z = proposal.center[2]
    lo = np.array([-cfg.max_offset, max(-cfg.max_offset, cfg.min_depth - p_z)])
    hi = np.array([cfg.max_offset, cfg.max_offset])

    x = np.zeros(2)
    f, g = _safe_eval(objective, x)
    if not math.isfinite(f):
        raise DivergedNonFinite("loss is not finite at the proposal")
    trace = [f]
    status = "max_iters"
    if np.linalg.norm(g) < cfg.grad_tol:
        status = "no_descent"
    else:
        step = cfg.step_init
        for _ in range(cfg.max_iters):
            accepted = False
            for attempt in range(cfg.max_backtracks):
                x_new = np.clip(x - step * g, lo, hi)
                moved = x - x_new
                if not moved.any():
                    break
                f_new, g_new = _safe_eval(objective, x_new)
                if math.isfinite(f_new) and f_new <= f - cfg.armijo * float(g @ moved):
                    accepted = True
                    break
                step *= cfg.backtrack
            if not accepted:
                status = "stalled"
                break
            decrease = f - f_new
            x, f, g = x_new, f_new, g_new
            trace.append(f)
            if attempt == 0:
                step = min(step / cfg.backtrack, cfg.max_step)
            projected = x - np.clip(x - g, lo, hi)
            if np.linalg.norm(projected) < cfg.grad_tol:
                status = "converged"
                break
            if decrease <= cfg.loss_tol * max(1.0, abs(f)):
                status = "loss_tol"
                break
        if np.any(x <= lo) or np.any(x >= hi):
            status = "clamped"

    offsets = RefinementOffsets(float(x[0]), float(x[1]))
    center = objective.centroid(x)
    theta = theta_from_beta(proposal.beta, math.atan2(center[0], center[2]))
    box = Box3D(proposal.cls, center, proposal.dims, theta)
    return RefineResult(offsets, box, trace, objective.report(x), status)


def propose_and_refine(camera, box2d, dims, beta, local_grid, gt_depth=None, weights=None,
                       cfg=None, cls=None):
    """Proposal from the 2D box, refinement, and the final oriented box.

    The yaw is recovered from the observation angle and the viewing angle of
    the refined centroid ray.
    """
    proposal, _ = make_proposal(camera, box2d, dims, beta, cls)
    return refine_pose(proposal, local_grid, camera, weights, cfg, gt_depth)


def empirical_depth_residual(camera, dims, depths, yaws=(0.0,), t_y=0.0, image_size=None):
    """Depth residual ``t_z - p_z`` of the pinhole proposal for boxes on the
    principal axis, swept over depth and yaw; also reports ``alpha_v``."""
    from .synth import IMAGE_SIZE, projected_box2d

    rows = []
    for z in depths:
        for yaw in yaws:
            box = Box3D("Car", (0.0, t_y, z), dims, yaw)
            box2d, _ = projected_box2d(camera, box, image_size or IMAGE_SIZE)
            if box2d is None:
                continue
            p_z = camera.fv * dims[1] / box2d.height
            rows.append({"t_z": z, "yaw": yaw, "alpha_v": viewing_angles(camera, box2d).alpha_v,
                         "p_z": p_z, "residual": z - p_z})
    return rows
