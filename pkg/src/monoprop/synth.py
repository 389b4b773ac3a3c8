"""Synthetic scenes rendered by exact ray-box intersection, plus brute-force oracles."""

import math
from dataclasses import dataclass, field

import numpy as np

from .camera import backproject, project
from .errors import PlacementFailure
from .evaluation import bev_footprint, box2d_iou, clip_polygon, polygon_area
from .instance_data import pixel_centers
from .kitti_io import Box2D, Box3D, CameraModel, DepthMap, KittiObject, write_labels

# KITTI-like left color camera without the stereo baseline column
DEFAULT_CAMERA = CameraModel.from_intrinsics(721.5377, 721.5377, 609.5593, 172.854)
IMAGE_SIZE = (1242, 375)
BACKGROUND_DEPTH = 120.0
CAMERA_HEIGHT = 1.65

# mean (d_x, d_y, d_z) = (length, height, width) and per-axis jitter
CLASS_SIZES = {
    "Car": ((3.9, 1.53, 1.63), (0.4, 0.12, 0.1)),
    "Pedestrian": ((0.84, 1.76, 0.66), (0.2, 0.12, 0.1)),
    "Cyclist": ((1.76, 1.74, 0.6), (0.15, 0.1, 0.08)),
}


@dataclass
class SceneSpec:
    seed: int = 0
    num_objects: int = 4
    classes: tuple = ("Car", "Car", "Pedestrian", "Cyclist")
    z_range: tuple = (5.0, 80.0)
    yaw_range: tuple = (-math.pi, math.pi)
    camera: CameraModel = field(default_factory=lambda: DEFAULT_CAMERA)
    image_size: tuple = IMAGE_SIZE
    background_depth: float = BACKGROUND_DEPTH
    camera_height: float = CAMERA_HEIGHT
    clearance: float = 1.0
    max_tries: int = 200

    def __post_init__(self):
        if not 0 < self.z_range[0] < self.z_range[1]:
            raise ValueError(f"invalid depth range {self.z_range}")
        if not self.yaw_range[0] <= self.yaw_range[1]:
            raise ValueError(f"invalid yaw range {self.yaw_range}")
        if self.num_objects < 0 or (self.num_objects and not self.classes):
            raise ValueError("need at least one class for a non-empty scene")


@dataclass
class Scene:
    objects: list            # KittiObject with ground-truth boxes
    depth: DepthMap
    camera: CameraModel
    owner: np.ndarray        # (H, W) index of the object seen at each pixel, -1 = background

    @property
    def boxes(self):
        return [o.box3d for o in self.objects]

    def labels_text(self):
        return write_labels(self.objects)


def box_ray_depths(camera, box, pixels):
    """Depth of the first hit of each pixel ray with ``box`` (inf on a miss).

    Rays are parameterized by camera-frame depth, so the slab test directly
    yields the depth that the renderer stores.
    """
    origin = backproject(camera, pixels, 1.0)
    direction = backproject(camera, pixels, 2.0) - origin
    origin = origin - direction
    c, s = math.cos(box.yaw), math.sin(box.yaw)
    inv = np.array([[c, 0.0, -s], [0.0, 1.0, 0.0], [s, 0.0, c]])
    o = (origin - box.t) @ inv.T
    d = direction @ inv.T
    half = 0.5 * np.asarray(box.dims)
    with np.errstate(divide="ignore", invalid="ignore"):
        t1 = (-half - o) / d
        t2 = (half - o) / d
    lo = np.where(d == 0, np.where(np.abs(o) <= half, -np.inf, np.inf), np.minimum(t1, t2))
    hi = np.where(d == 0, np.where(np.abs(o) <= half, np.inf, -np.inf), np.maximum(t1, t2))
    near = lo.max(axis=-1)
    far = hi.min(axis=-1)
    hit = (near <= far) & (near > 0)
    return np.where(hit, near, np.inf)


def render_depth(camera, boxes, image_size=IMAGE_SIZE, background=BACKGROUND_DEPTH):
    """z-buffered depth of the camera-facing box surfaces over a background plane."""
    width, height = image_size
    centers = pixel_centers(height, width)
    depth = np.full((height, width), float(background))
    owner = np.full((height, width), -1, dtype=np.int64)
    for i, box in enumerate(boxes):
        win = _pixel_window(camera, box, width, height)
        if win is None:
            continue
        r0, r1, c0, c1 = win
        z = box_ray_depths(camera, box, centers[r0:r1, c0:c1])
        sub = depth[r0:r1, c0:c1]
        closer = z < sub
        sub[closer] = z[closer]
        owner[r0:r1, c0:c1][closer] = i
    return DepthMap(depth), owner


def _pixel_window(camera, box, width, height):
    corners = box.corners()
    if corners[:, 2].min() <= 1e-3:
        return 0, height, 0, width
    uv = project(camera, corners)
    c0 = max(int(math.floor(uv[:, 0].min())) - 1, 0)
    c1 = min(int(math.ceil(uv[:, 0].max())) + 1, width)
    r0 = max(int(math.floor(uv[:, 1].min())) - 1, 0)
    r1 = min(int(math.ceil(uv[:, 1].max())) + 1, height)
    if c0 >= c1 or r0 >= r1:
        return None
    return r0, r1, c0, c1


def projected_box2d(camera, box, image_size=IMAGE_SIZE, score=1.0):
    """Tight 2D box around the projected corners, clipped to the image.

    Returns ``(box2d, truncation)`` where truncation is the fraction of the
    unclipped box area that falls outside the image.
    """
    width, height = image_size
    uv = project(camera, box.corners())
    u1, v1 = uv.min(axis=0)
    u2, v2 = uv.max(axis=0)
    full = (u2 - u1) * (v2 - v1)
    cu1, cv1 = max(u1, 0.0), max(v1, 0.0)
    cu2, cv2 = min(u2, float(width)), min(v2, float(height))
    if cu2 <= cu1 or cv2 <= cv1:
        return None, 1.0
    trunc = 1.0 - (cu2 - cu1) * (cv2 - cv1) / full
    return Box2D(cu1, cv1, cu2, cv2, score=score, cls=box.cls), trunc


def _occlusion_level(visible_fraction):
    if visible_fraction >= 0.95:
        return 0
    if visible_fraction >= 0.5:
        return 1
    return 2


def _sample_box(rng, scene_spec):
    cls = scene_spec.classes[rng.integers(len(scene_spec.classes))]
    mean, jitter = CLASS_SIZES[cls]
    dims = np.maximum(np.asarray(mean) + rng.normal(0, jitter), 0.3)
    z = rng.uniform(*scene_spec.z_range)
    cam = scene_spec.camera
    width = scene_spec.image_size[0]
    # keep the centroid inside the horizontal field of view with a margin
    x_lo = (0.1 * width - cam.cu) * z / cam.fu
    x_hi = (0.9 * width - cam.cu) * z / cam.fu
    x = rng.uniform(x_lo, x_hi)
    y = scene_spec.camera_height - 0.5 * dims[1]
    yaw = rng.uniform(*scene_spec.yaw_range)
    return Box3D(cls, (x, y, z), tuple(dims), yaw)


def _too_close(box, others, clearance):
    grown = box.replace(dims=(box.dims[0] + clearance, box.dims[1], box.dims[2] + clearance))
    poly = bev_footprint(grown)
    return any(polygon_area(clip_polygon(poly, bev_footprint(o))) > 0 for o in others)


def _visible_fraction(camera, box, owner, index, image_size):
    _, alone = render_depth(camera, [box], image_size)
    total = int((alone == 0).sum())
    if total == 0:
        return 0.0
    return float(((owner == index) & (alone == 0)).sum()) / total


def generate_scene(scene_spec):
    """Place non-overlapping boxes on the ground plane and render their depth.

    Deterministic for a given ``scene_spec.seed``.
    """
    rng = np.random.default_rng(scene_spec.seed)
    boxes = []
    for _ in range(scene_spec.num_objects):
        for _ in range(scene_spec.max_tries):
            box = _sample_box(rng, scene_spec)
            if not _too_close(box, boxes, scene_spec.clearance):
                break
        else:
            raise PlacementFailure(f"could not place object {len(boxes)} after "
                                   f"{scene_spec.max_tries} tries (seed {scene_spec.seed})")
        boxes.append(box)
    return scene_from_boxes(boxes, scene_spec.camera, scene_spec.image_size, scene_spec.background_depth)


def scene_from_boxes(boxes, camera=DEFAULT_CAMERA, image_size=IMAGE_SIZE,
                     background=BACKGROUND_DEPTH):
    depth, owner = render_depth(camera, boxes, image_size, background)
    objects = []
    for i, box in enumerate(boxes):
        box2d, trunc = projected_box2d(camera, box, image_size)
        if box2d is None:
            continue
        occ = _occlusion_level(_visible_fraction(camera, box, owner, i, image_size))
        box3d = box.replace(truncation=min(round(trunc, 2), 1.0), occlusion=occ)
        objects.append(KittiObject(box2d, box3d, box3d.observation_angle()))
    return Scene(objects, depth, camera, owner)


def split_seeds(master_seed, count):
    """Independent per-scene seeds derived from one master seed."""
    return [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(master_seed).spawn(count)]


def jitter_box(box, rng, scale=0.05, min_iou=0.7, max_tries=100):
    """Gaussian jitter on 2D box center and size (relative to box size) keeping
    at least ``min_iou`` overlap with the original."""
    for _ in range(max_tries):
        du, dv, dw, dh = rng.normal(0.0, scale, 4)
        w = box.width * math.exp(dw)
        h = box.height * math.exp(dh)
        uc, vc = box.center
        uc += du * box.width
        vc += dv * box.height
        cand = Box2D(uc - w / 2, vc - h / 2, uc + w / 2, vc + h / 2, box.score, box.cls)
        if box2d_iou(cand, box) >= min_iou:
            return cand
    return box


# -- oracles -----------------------------------------------------------------

def oracle_monte_carlo_iou(a, b, n_samples=100_000, seed=0):
    """Rejection-sampled 3D IoU. Returns ``(iou, standard_error)``."""
    if n_samples < 10_000:
        raise ValueError("use at least 1e4 samples")
    corners = np.vstack([a.corners(), b.corners()])
    lo, hi = corners.min(axis=0), corners.max(axis=0)
    rng = np.random.default_rng(seed)
    chunks_a, chunks_b = [], []
    remaining = n_samples
    while remaining:
        n = min(remaining, 1_000_000)
        pts = rng.uniform(lo, hi, size=(n, 3))
        chunks_a.append(_inside(pts, a))
        chunks_b.append(_inside(pts, b))
        remaining -= n
    in_a = np.concatenate(chunks_a)
    in_b = np.concatenate(chunks_b)
    union = int((in_a | in_b).sum())
    if union == 0:
        return 0.0, 0.0
    p = float((in_a & in_b).sum()) / union
    return p, math.sqrt(max(p * (1 - p), 0.0) / union)


def _inside(pts, box):
    c, s = math.cos(box.yaw), math.sin(box.yaw)
    d = pts - box.t
    local = np.stack([c * d[:, 0] - s * d[:, 2], d[:, 1], s * d[:, 0] + c * d[:, 2]], axis=1)
    return np.all(np.abs(local) <= 0.5 * np.asarray(box.dims), axis=1)


def oracle_numeric_gradient(f, params, h=1e-5):
    """Central differences of the scalar function ``f`` at ``params``."""
    x = np.array(params, dtype=np.float64)
    grad = np.zeros_like(x)
    for i in range(x.size):
        step = np.zeros_like(x)
        step.flat[i] = h
        grad.flat[i] = (f(x + step) - f(x - step)) / (2.0 * h)
    return grad
