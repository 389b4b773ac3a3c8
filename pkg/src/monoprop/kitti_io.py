"""KITTI calibration, label, detection and depth-map I/O.

Labels store the bottom-face center of each object; on ingest it is moved to the
geometric centroid (``t_y = y_file - h / 2``) and moved back when writing, so
everything inside the library works with true centroids.

Dimension order: KITTI files list ``h w l``; a :class:`Box3D` stores
``dims = (d_x, d_y, d_z) = (l, h, w)`` in the object frame.
"""

import io
import math
from dataclasses import dataclass, field

import numpy as np
from PIL import Image

from .angles import normalize_angle
from .errors import MalformedLine, MalformedNumber, MissingKey, UnsupportedFormat

DEPTH_SCALE = 256.0
ALPHA_WARN_TOL = 1e-2


@dataclass(frozen=True)
class CameraModel:
    """3x4 projection matrix of the rectified left color camera (P2)."""

    P: np.ndarray

    def __post_init__(self):
        P = np.array(self.P, dtype=np.float64).reshape(3, 4)
        P.setflags(write=False)
        object.__setattr__(self, "P", P)
        if not (P[0, 0] > 0 and P[1, 1] > 0):
            raise ValueError("focal lengths must be positive")
        if not np.array_equal(P[2, :3], [0.0, 0.0, 1.0]) or not np.isfinite(P[2, 3]):
            raise ValueError("third row of P must be (0, 0, 1, finite)")

    @classmethod
    def from_intrinsics(cls, fu, fv, cu, cv, bx=0.0, by=0.0, tz=0.0):
        return cls(np.array([[fu, 0.0, cu, -fu * bx],
                             [0.0, fv, cv, -fv * by],
                             [0.0, 0.0, 1.0, tz]]))

    @property
    def fu(self):
        return float(self.P[0, 0])

    @property
    def fv(self):
        return float(self.P[1, 1])

    @property
    def cu(self):
        return float(self.P[0, 2])

    @property
    def cv(self):
        return float(self.P[1, 2])

    @property
    def bx(self):
        return float(self.P[0, 3] / -self.fu)

    @property
    def by(self):
        return float(self.P[1, 3] / -self.fv)

    def __eq__(self, other):
        return isinstance(other, CameraModel) and np.array_equal(self.P, other.P)

    def __hash__(self):
        return hash(self.P.tobytes())


@dataclass(frozen=True)
class ImageMeta:
    width: int
    height: int
    frame_id: str = ""

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValueError("image size must be positive")


@dataclass(frozen=True)
class Box2D:
    u1: float
    v1: float
    u2: float
    v2: float
    score: float = 1.0
    cls: str = "Car"

    def __post_init__(self):
        if not (self.u2 > self.u1 and self.v2 > self.v1):
            raise ValueError(f"degenerate 2D box {self.u1, self.v1, self.u2, self.v2}")

    @property
    def width(self):
        return self.u2 - self.u1

    @property
    def height(self):
        return self.v2 - self.v1

    @property
    def center(self):
        return 0.5 * (self.u1 + self.u2), 0.5 * (self.v1 + self.v2)

    def area(self):
        return self.width * self.height


@dataclass(frozen=True)
class Box3D:
    """Amodal box: centroid ``center`` (camera frame, m), ``dims`` (d_x, d_y, d_z),
    and ``yaw`` about the camera y axis (KITTI ``rotation_y``)."""

    cls: str
    center: tuple
    dims: tuple
    yaw: float
    truncation: float = 0.0
    occlusion: int = 0

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        object.__setattr__(self, "dims", tuple(float(d) for d in self.dims))
        object.__setattr__(self, "yaw", normalize_angle(self.yaw))
        if len(self.center) != 3 or len(self.dims) != 3:
            raise ValueError("center and dims must be 3-vectors")
        if min(self.dims) <= 0:
            raise ValueError(f"non-positive dimensions {self.dims}")
        if self.center[2] <= 0:
            raise ValueError(f"box centroid behind camera (t_z={self.center[2]})")

    @property
    def t(self):
        return np.asarray(self.center)

    @property
    def height(self):
        return self.dims[1]

    def horizontal_angle(self):
        """Angle of the centroid ray, atan2(t_x, t_z)."""
        return math.atan2(self.center[0], self.center[2])

    def observation_angle(self):
        """KITTI ``alpha``: yaw relative to the centroid viewing ray."""
        return normalize_angle(self.yaw - self.horizontal_angle())

    def corners(self):
        """(8, 3) corners in the camera frame."""
        dx, dy, dz = (0.5 * d for d in self.dims)
        local = np.array([[sx * dx, sy * dy, sz * dz]
                          for sx in (1, -1) for sy in (1, -1) for sz in (1, -1)])
        c, s = math.cos(self.yaw), math.sin(self.yaw)
        rot = np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])
        return local @ rot.T + self.t

    def replace(self, **changes):
        fields_ = dict(cls=self.cls, center=self.center, dims=self.dims, yaw=self.yaw,
                       truncation=self.truncation, occlusion=self.occlusion)
        fields_.update(changes)
        return Box3D(**fields_)


@dataclass
class DepthMap:
    """Per-pixel depth in meters, shape (height, width); ``<= 0`` marks invalid."""

    depth: np.ndarray

    def __post_init__(self):
        self.depth = np.asarray(self.depth, dtype=np.float64)
        if self.depth.ndim != 2:
            raise ValueError("depth map must be 2-D")
        bad = (self.depth > 0) & ~np.isfinite(self.depth)
        if bad.any():
            raise ValueError("valid depths must be finite")

    @property
    def height(self):
        return self.depth.shape[0]

    @property
    def width(self):
        return self.depth.shape[1]

    @property
    def valid(self):
        return self.depth > 0


@dataclass
class KittiObject:
    """One non-DontCare label line."""

    box2d: Box2D
    box3d: Box3D
    alpha: float | None = None

    @property
    def score(self):
        return self.box2d.score

    def __iter__(self):
        return iter((self.box2d, self.box3d))


@dataclass
class LabelSet:
    objects: list = field(default_factory=list)
    dontcare: list = field(default_factory=list)
    warnings: list = field(default_factory=list)

    def pairs(self):
        return [(o.box2d, o.box3d) for o in self.objects]


# -- calibration -------------------------------------------------------------

def parse_calib(text):
    for line in text.splitlines():
        key, _, rest = line.partition(":")
        if key.strip() != "P2":
            continue
        tokens = rest.split()
        if len(tokens) != 12:
            raise MalformedNumber(f"P2 needs 12 values, got {len(tokens)}")
        try:
            values = [float(t) for t in tokens]
        except ValueError as exc:
            raise MalformedNumber(f"unparseable P2 value: {exc}") from None
        if not all(math.isfinite(v) for v in values):
            raise MalformedNumber("P2 contains non-finite values")
        return CameraModel(np.array(values).reshape(3, 4))
    raise MissingKey("P2")


def _fmt_row(values):
    return " ".join(f"{v:.12e}" for v in np.ravel(values))


def write_calib(camera):
    """KITTI calib text. P0/P1/P3 repeat P2 and the extrinsics are identity;
    only P2 is ever read back."""
    eye34 = np.hstack([np.eye(3), np.zeros((3, 1))])
    lines = [f"P{i}: {_fmt_row(camera.P)}" for i in range(4)]
    lines.append(f"R0_rect: {_fmt_row(np.eye(3))}")
    lines.append(f"Tr_velo_to_cam: {_fmt_row(eye34)}")
    lines.append(f"Tr_imu_to_velo: {_fmt_row(eye34)}")
    return "\n".join(lines) + "\n"


# -- labels ------------------------------------------------------------------

def _float(tok, lineno):
    try:
        return float(tok)
    except ValueError:
        raise MalformedLine(lineno, f"unparseable number {tok!r}") from None


def parse_labels(text, alpha_tol=ALPHA_WARN_TOL):
    """Parse a KITTI label or detection file.

    Returns a :class:`LabelSet`. ``warnings`` lists objects whose ``alpha``
    disagrees with ``rotation_y - atan2(x, z)`` by more than ``alpha_tol``.
    """
    out = LabelSet()
    for lineno, line in enumerate(text.splitlines(), start=1):
        parts = line.split()
        if not parts:
            continue
        if len(parts) not in (15, 16):
            raise MalformedLine(lineno, f"expected 15 or 16 fields, got {len(parts)}")
        cls = parts[0]
        nums = [_float(p, lineno) for p in parts[1:]]
        trunc, occ, alpha = nums[0], nums[1], nums[2]
        u1, v1, u2, v2 = nums[3:7]
        h, w, l = nums[7:10]
        x, y, z = nums[10:13]
        ry = nums[13]
        score = nums[14] if len(nums) == 15 else 1.0
        try:
            box2d = Box2D(u1, v1, u2, v2, score=score, cls=cls)
        except ValueError as exc:
            raise MalformedLine(lineno, str(exc)) from None
        if cls == "DontCare":
            out.dontcare.append(box2d)
            continue
        if occ != int(occ):
            raise MalformedLine(lineno, f"occlusion must be an integer, got {occ}")
        try:
            box3d = Box3D(cls, (x, y - 0.5 * h, z), (l, h, w), ry,
                          truncation=trunc, occlusion=int(occ))
        except ValueError as exc:
            raise MalformedLine(lineno, str(exc)) from None
        disagreement = abs(normalize_angle(alpha - box3d.observation_angle()))
        if disagreement > alpha_tol:
            out.warnings.append(
                f"line {lineno}: alpha {alpha:.2f} differs from rotation_y - atan2(x, z) "
                f"by {disagreement:.4f} rad")
        out.objects.append(KittiObject(box2d, box3d, alpha))
    return out


def _object_fields(box2d, box3d, alpha):
    if alpha is None:
        alpha = box3d.observation_angle()
    d_x, d_y, d_z = box3d.dims
    t_x, t_y, t_z = box3d.center
    values = (box3d.truncation, alpha, box2d.u1, box2d.v1, box2d.u2, box2d.v2,
              d_y, d_z, d_x, t_x, t_y + 0.5 * d_y, t_z, box3d.yaw)
    trunc, alpha, *rest = (f"{v:.2f}" for v in values)
    return [box3d.cls, trunc, str(box3d.occlusion), alpha, *rest]


def _coerce(obj):
    if isinstance(obj, KittiObject):
        return obj.box2d, obj.box3d, obj.score, obj.alpha
    box2d, box3d, *rest = obj
    score = rest[0] if rest else box2d.score
    return box2d, box3d, score, None


def write_detections(objects):
    """16-field detection lines; accepts KittiObjects or (Box2D, Box3D, score)."""
    lines = []
    for obj in objects:
        box2d, box3d, score, alpha = _coerce(obj)
        lines.append(" ".join(_object_fields(box2d, box3d, alpha) + [f"{score:.2f}"]))
    return "".join(line + "\n" for line in lines)


def write_labels(objects, dontcare=()):
    """15-field ground-truth lines followed by DontCare regions."""
    lines = []
    for obj in objects:
        box2d, box3d, _, alpha = _coerce(obj)
        lines.append(" ".join(_object_fields(box2d, box3d, alpha)))
    for b in dontcare:
        lines.append(f"DontCare -1 -1 -10 {b.u1:.2f} {b.v1:.2f} {b.u2:.2f} {b.v2:.2f} "
                     "-1 -1 -1 -1000 -1000 -1000 -10")
    return "".join(line + "\n" for line in lines)


# -- depth maps --------------------------------------------------------------

def read_depth_png(data):
    """Decode a KITTI 16-bit depth PNG (meters = raw / 256, raw 0 = invalid)."""
    img = Image.open(io.BytesIO(data))
    if img.mode not in ("I;16", "I;16B", "I;16L"):
        raise UnsupportedFormat(f"expected 16-bit single-channel PNG, got mode {img.mode!r}")
    raw = np.asarray(img, dtype=np.uint16).astype(np.float64)
    return DepthMap(raw / DEPTH_SCALE)


def write_depth_png(depth):
    raw = np.where(depth.valid, np.rint(depth.depth * DEPTH_SCALE), 0.0)
    raw = np.clip(raw, 0, 65535).astype(np.uint16)
    buf = io.BytesIO()
    Image.fromarray(raw).save(buf, format="PNG")
    return buf.getvalue()
