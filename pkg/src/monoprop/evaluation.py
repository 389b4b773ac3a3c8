"""KITTI-style metrics: rotated BEV IoU, 3D IoU, interpolated AP, depth error."""

import math
from dataclasses import dataclass

import numpy as np

from .errors import EmptySet

AREA_TOL = 1e-12
RECALL_TOL = 1e-9
DONTCARE_IOA = 0.5
NEIGHBOR_CLASSES = {"Car": ("Van",), "Pedestrian": ("Person_sitting",)}


@dataclass(frozen=True)
class DifficultyFilter:
    name: str
    min_height: float
    max_occlusion: int
    max_truncation: float

    def accepts(self, box2d, box3d):
        return (box2d.height >= self.min_height and box3d.occlusion <= self.max_occlusion
                and box3d.truncation <= self.max_truncation)


# public benchmark thresholds
DIFFICULTIES = {
    "easy": DifficultyFilter("easy", 40.0, 0, 0.15),
    "moderate": DifficultyFilter("moderate", 25.0, 1, 0.30),
    "hard": DifficultyFilter("hard", 25.0, 2, 0.50),
}


@dataclass
class PRCurve:
    recall: np.ndarray
    precision: np.ndarray
    ap: float
    num_points: int = 11

    def to_text(self):
        lines = ["# recall precision"]
        lines += [f"{r:.6f} {p:.6f}" for r, p in zip(self.recall, self.precision)]
        lines.append(f"# AP{self.num_points} = {self.ap:.2f}")
        return "\n".join(lines) + "\n"


# -- polygons ----------------------------------------------------------------

def polygon_area(poly):
    """Signed shoelace area (positive for counter-clockwise)."""
    if len(poly) < 3:
        return 0.0
    x, y = np.asarray(poly, dtype=np.float64).T
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def clip_polygon(subject, clip):
    """Sutherland-Hodgman clip of ``subject`` by the convex CCW polygon ``clip``.

    Containment is closed: vertices on a clip edge are kept, so collinear
    edges do not drop area.
    """
    output = [tuple(p) for p in subject]
    n = len(clip)
    for i in range(n):
        if not output:
            break
        ax, ay = clip[i]
        bx, by = clip[(i + 1) % n]
        ex, ey = bx - ax, by - ay

        def side(p):
            return ex * (p[1] - ay) - ey * (p[0] - ax)

        inputs, output = output, []
        s = inputs[-1]
        ds = side(s)
        for e in inputs:
            de = side(e)
            if de >= 0:
                if ds < 0:
                    t = ds / (ds - de)
                    output.append((s[0] + t * (e[0] - s[0]), s[1] + t * (e[1] - s[1])))
                output.append(e)
            elif ds >= 0:
                t = ds / (ds - de)
                output.append((s[0] + t * (e[0] - s[0]), s[1] + t * (e[1] - s[1])))
            s, ds = e, de
    return output


def bev_footprint(box):
    """(4, 2) counter-clockwise (x, z) corners of the box footprint."""
    hx, hz = 0.5 * box.dims[0], 0.5 * box.dims[2]
    c, s = math.cos(box.yaw), math.sin(box.yaw)
    local = np.array([[hx, hz], [-hx, hz], [-hx, -hz], [hx, -hz]])
    x = box.center[0] + c * local[:, 0] + s * local[:, 1]
    z = box.center[2] - s * local[:, 0] + c * local[:, 1]
    poly = np.stack([x, z], axis=1)
    return poly if polygon_area(poly) > 0 else poly[::-1]


def _axis_half_extents(box):
    """(half_x, half_z) when the footprint is exactly axis aligned, else None."""
    yaw = box.yaw
    if yaw == 0.0 or abs(yaw) == math.pi:
        return 0.5 * box.dims[0], 0.5 * box.dims[2]
    if abs(yaw) == 0.5 * math.pi:
        return 0.5 * box.dims[2], 0.5 * box.dims[0]
    return None


def _overlap_1d(a_lo, a_hi, b_lo, b_hi):
    return max(0.0, min(a_hi, b_hi) - max(a_lo, b_lo))


def bev_intersection(a, b):
    ea, eb = _axis_half_extents(a), _axis_half_extents(b)
    area_a = a.dims[0] * a.dims[2]
    area_b = b.dims[0] * b.dims[2]
    if ea is not None and eb is not None:
        (ax, _, az), (bx, _, bz) = a.center, b.center
        return (_overlap_1d(ax - ea[0], ax + ea[0], bx - eb[0], bx + eb[0])
                * _overlap_1d(az - ea[1], az + ea[1], bz - eb[1], bz + eb[1]))
    inter = polygon_area(clip_polygon(bev_footprint(a), bev_footprint(b)))
    smaller = min(area_a, area_b)
    if inter < AREA_TOL:
        return 0.0
    if abs(inter - smaller) <= AREA_TOL:
        return smaller
    return min(inter, smaller)


def _iou(inter, size_a, size_b):
    if inter <= 0.0:
        return 0.0
    return min(1.0, inter / (size_a + size_b - inter))


def bev_iou(a, b):
    return _iou(bev_intersection(a, b), a.dims[0] * a.dims[2], b.dims[0] * b.dims[2])


def iou_3d(a, b):
    ha, hb = 0.5 * a.dims[1], 0.5 * b.dims[1]
    dy = _overlap_1d(a.center[1] - ha, a.center[1] + ha, b.center[1] - hb, b.center[1] + hb)
    inter = bev_intersection(a, b) * dy
    return _iou(inter, float(np.prod(a.dims)), float(np.prod(b.dims)))


def box2d_iou(a, b):
    inter = _overlap_1d(a.u1, a.u2, b.u1, b.u2) * _overlap_1d(a.v1, a.v2, b.v1, b.v2)
    return _iou(inter, a.area(), b.area())


def box2d_ioa(det, region):
    """Intersection over the area of ``det``."""
    inter = _overlap_1d(det.u1, det.u2, region.u1, region.u2) * \
        _overlap_1d(det.v1, det.v2, region.v1, region.v2)
    return inter / det.area()


# -- average precision -------------------------------------------------------

@dataclass
class EvalFrame:
    gts: list
    dets: list
    dontcare: list = ()


def recall_points(num_points):
    if num_points == 11:
        return np.linspace(0.0, 1.0, 11)
    if num_points == 40:
        return np.linspace(1.0 / 40, 1.0, 40)
    raise ValueError("num_points must be 11 or 40")


def interpolated_ap(recall, precision, num_points=11):
    """Mean over the recall grid of the best precision at recall >= r, times 100."""
    recall = np.asarray(recall, float)
    precision = np.asarray(precision, float)
    total = 0.0
    for r in recall_points(num_points):
        hits = precision[recall >= r - RECALL_TOL]
        total += hits.max() if hits.size else 0.0
    return 100.0 * total / num_points


def _gt_status(box2d, box3d, cls, difficulty):
    """1 = counted, 0 = ignored (matches are neither TP nor FP), None = other class."""
    if cls is None or box3d.cls == cls:
        if difficulty is None or difficulty.accepts(box2d, box3d):
            return 1
        return 0
    if box3d.cls in NEIGHBOR_CLASSES.get(cls, ()):
        return 0
    return None


def evaluate_frames(frames, iou_fn, threshold, difficulty=None, cls=None, num_points=11):
    """Greedy score-ordered matching over all frames followed by interpolated AP.

    Ties in score keep input order (frame by frame, detection by detection).
    """
    n_valid = 0
    frame_gts = []
    queue = []
    for fi, frame in enumerate(frames):
        gts = []
        for box2d, box3d in frame.gts:
            status = _gt_status(box2d, box3d, cls, difficulty)
            if status is not None:
                gts.append((box3d, status))
                n_valid += status
        frame_gts.append(gts)
        for di, (box2d, box3d) in enumerate(frame.dets):
            if cls is None or box3d.cls == cls:
                queue.append((-box2d.score, fi, di, box2d, box3d))
    queue.sort(key=lambda item: item[:3])

    matched = [np.zeros(len(g), dtype=bool) for g in frame_gts]
    tp_flags = []
    for _, fi, _, box2d, box3d in queue:
        gts = frame_gts[fi]
        ious = np.array([iou_fn(box3d, g) for g, _ in gts]) if gts else np.zeros(0)
        best, best_iou = -1, threshold
        ignore = False
        for gi, (_, status) in enumerate(gts):
            if ious[gi] < threshold:
                continue
            if status == 1 and not matched[fi][gi]:
                if best < 0 or ious[gi] > best_iou:
                    best, best_iou = gi, ious[gi]
            elif status == 0:
                ignore = True
        if best >= 0:
            matched[fi][best] = True
            tp_flags.append(True)
            continue
        if ignore:
            continue
        if difficulty is not None and box2d.height < difficulty.min_height:
            continue
        if any(box2d_ioa(box2d, dc) > DONTCARE_IOA for dc in frames[fi].dontcare):
            continue
        tp_flags.append(False)

    if n_valid == 0:
        return PRCurve(np.zeros(0), np.zeros(0), 0.0, num_points)
    tp = np.cumsum(tp_flags, dtype=np.float64)
    fp = np.cumsum(np.logical_not(tp_flags), dtype=np.float64)
    recall = tp / n_valid
    precision = tp / np.maximum(tp + fp, 1.0)
    return PRCurve(recall, precision, interpolated_ap(recall, precision, num_points), num_points)


def average_precision(dets, gts, dontcare=(), iou_fn=None, threshold=0.7, difficulty=None,
                      cls=None, num_points=11):
    """Single-frame convenience wrapper around :func:`evaluate_frames`."""
    return evaluate_frames([EvalFrame(list(gts), list(dets), list(dontcare))],
                           iou_fn or bev_iou, threshold, difficulty, cls, num_points)


# -- depth error -------------------------------------------------------------

def depth_error_stats(pred, gt, keep=None):
    """(mean absolute error, population std of the absolute errors) in meters."""
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    if pred.shape != gt.shape:
        raise ValueError("prediction and ground truth must be paired")
    err = np.abs(pred - gt)
    if keep is not None:
        err = err[np.asarray(keep, dtype=bool)]
    if err.size == 0:
        raise EmptySet("no depth pairs left after filtering")
    return float(err.mean()), float(err.std())


def format_depth_error(mean, std):
    return f"{mean:.2f} / {std:.2f}"
