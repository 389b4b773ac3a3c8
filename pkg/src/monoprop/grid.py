"""Instance grids: L x W point grids with validity mask and expected pixels.

Binary record layout (all little-endian)::

    magic   4 bytes  b"IGRD"
    version u16      1
    L, W    u16, u16
    frame   u8       0 = local, 1 = camera
    mask    ceil(L*W / 8) bytes, row-major, first cell in the MSB of byte 0
    points  3*L*W float32, row-major (L, W, 3)
    G       2*L*W float32, row-major (L, W, 2), (u, v) per cell
"""

import struct
from dataclasses import dataclass, replace

import numpy as np

from .errors import FrameMismatch

MAGIC = b"IGRD"
VERSION = 1
LOCAL = "local"
CAMERA = "camera"
_FRAME_CODES = {LOCAL: 0, CAMERA: 1}
_HEADER = struct.Struct("<4sHHHB")


@dataclass
class InstanceGrid:
    points: np.ndarray        # (L, W, 3) meters
    mask: np.ndarray          # (L, W) bool
    G: np.ndarray             # (L, W, 2) expected pixel (u, v)
    frame: str
    box: object = None        # source Box2D

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=np.float64)
        self.mask = np.asarray(self.mask, dtype=bool)
        self.G = np.asarray(self.G, dtype=np.float64)
        if self.frame not in _FRAME_CODES:
            raise ValueError(f"unknown frame tag {self.frame!r}")
        L, W = self.mask.shape
        if self.points.shape != (L, W, 3) or self.G.shape != (L, W, 2):
            raise ValueError("points/G shapes do not match the mask")

    @property
    def shape(self):
        return self.mask.shape

    @property
    def count(self):
        return int(self.mask.sum())

    def valid_points(self):
        return self.points[self.mask]

    def expect_frame(self, frame):
        if self.frame != frame:
            raise FrameMismatch(f"expected a {frame}-frame grid, got {self.frame}")

    def with_points(self, points, frame):
        return replace(self, points=points, frame=frame)

    def to_bytes(self):
        L, W = self.shape
        header = _HEADER.pack(MAGIC, VERSION, L, W, _FRAME_CODES[self.frame])
        bits = np.packbits(self.mask.ravel()).tobytes()
        pts = np.where(self.mask[..., None], self.points, 0.0).astype("<f4").tobytes()
        return header + bits + pts + self.G.astype("<f4").tobytes()

    @classmethod
    def from_bytes(cls, data, box=None):
        magic, version, L, W, code = _HEADER.unpack_from(data)
        if magic != MAGIC or version != VERSION:
            raise ValueError("not an instance-grid record")
        frame = {v: k for k, v in _FRAME_CODES.items()}[code]
        off = _HEADER.size
        nbits = (L * W + 7) // 8
        mask = np.unpackbits(np.frombuffer(data, np.uint8, nbits, off))[:L * W]
        off += nbits
        points = np.frombuffer(data, "<f4", 3 * L * W, off).reshape(L, W, 3)
        off += 12 * L * W
        G = np.frombuffer(data, "<f4", 2 * L * W, off).reshape(L, W, 2)
        if off + 8 * L * W != len(data):
            raise ValueError("trailing or missing bytes in instance-grid record")
        return cls(points.astype(np.float64), mask.reshape(L, W).astype(bool),
                   G.astype(np.float64), frame, box)

    def dump_text(self):
        """Readable dump: one line per valid cell, ``i j x y z u v``."""
        L, W = self.shape
        lines = [f"frame={self.frame} L={L} W={W} K={self.count}"]
        for i, j in zip(*np.nonzero(self.mask)):
            x, y, z = self.points[i, j]
            u, v = self.G[i, j]
            lines.append(f"{i} {j} {x:.6f} {y:.6f} {z:.6f} {u:.3f} {v:.3f}")
        return "\n".join(lines) + "\n"
