"""Minimal static SVG writer for PR curves and scene views."""

from xml.sax.saxutils import escape, quoteattr

import numpy as np

from .camera import project
from .errors import BehindCamera
from .evaluation import bev_footprint

DET_COLOR = "green"
GT_COLOR = "red"
# Box3D.corners() index bits are (x, y, z) sign flips, so edges join indices
# that differ in exactly one bit
BOX_EDGES = [(i, i ^ bit) for i in range(8) for bit in (1, 2, 4) if i < i ^ bit]


class Canvas:
    def __init__(self, width, height):
        self.width = width
        self.height = height
        self.items = []

    def rect(self, x, y, w, h, stroke="black", fill="none", width=1.0):
        self.items.append(f'<rect x="{x:.2f}" y="{y:.2f}" width="{w:.2f}" height="{h:.2f}" '
                          f'stroke="{stroke}" fill="{fill}" stroke-width="{width:g}"/>')

    def line(self, x1, y1, x2, y2, stroke="black", width=1.0):
        self.items.append(f'<line x1="{x1:.2f}" y1="{y1:.2f}" x2="{x2:.2f}" y2="{y2:.2f}" '
                          f'stroke="{stroke}" stroke-width="{width:g}"/>')

    def polyline(self, pts, stroke="black", width=1.0, closed=False):
        if len(pts) == 0:
            return
        coords = " ".join(f"{x:.2f},{y:.2f}" for x, y in pts)
        tag = "polygon" if closed else "polyline"
        self.items.append(f'<{tag} points="{coords}" stroke="{stroke}" fill="none" '
                          f'stroke-width="{width:g}"/>')

    def circle(self, x, y, r, fill="black"):
        self.items.append(f'<circle cx="{x:.2f}" cy="{y:.2f}" r="{r:g}" fill="{fill}"/>')

    def text(self, x, y, s, size=12, anchor="start"):
        self.items.append(f'<text x="{x:.2f}" y="{y:.2f}" font-size="{size}" '
                          f'text-anchor={quoteattr(anchor)}>{escape(str(s))}</text>')

    def render(self):
        head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{self.width}" '
                f'height="{self.height}" viewBox="0 0 {self.width} {self.height}">')
        return "\n".join([head, *self.items, "</svg>"]) + "\n"


def pr_curve_svg(curve, title="", size=(400, 320), margin=40):
    w, h = size
    c = Canvas(w, h)
    pw, ph = w - 2 * margin, h - 2 * margin
    c.rect(margin, margin, pw, ph)
    for t in np.linspace(0, 1, 6):
        c.text(margin + t * pw, h - margin + 15, f"{t:.1f}", 10, "middle")
        c.text(margin - 5, h - margin - t * ph + 4, f"{t:.1f}", 10, "end")
    c.text(w / 2, h - 5, "recall", 12, "middle")
    c.text(5, margin - 10, "precision", 12)
    c.text(w / 2, 20, f"{title} AP={curve.ap:.2f}", 12, "middle")
    pts = [(margin + r * pw, h - margin - p * ph) for r, p in zip(curve.recall, curve.precision)]
    c.polyline(pts, stroke="blue", width=1.5)
    return c.render()


def scene_svg(camera, image_size, gts=(), dets=(), points=(), bev_range=(-40.0, 40.0, 0.0, 80.0),
              scale=6.0):
    """Image-plane wireframes on top, bird's-eye rectangles below.

    ``gts``/``dets`` are Box3D; ``points`` are camera-frame (N, 3) arrays.
    """
    img_w, img_h = image_size
    x0, x1, z0, z1 = bev_range
    bev_w, bev_h = (x1 - x0) * scale, (z1 - z0) * scale
    pad = 10
    width = int(max(img_w, bev_w) + 2 * pad)
    height = int(img_h + bev_h + 3 * pad)
    c = Canvas(width, height)

    # image panel
    c.rect(pad, pad, img_w, img_h)
    for boxes, color in ((gts, GT_COLOR), (dets, DET_COLOR)):
        for box in boxes:
            try:
                uv = project(camera, box.corners())
            except BehindCamera:
                continue
            for a, b in BOX_EDGES:
                c.line(pad + uv[a, 0], pad + uv[a, 1], pad + uv[b, 0], pad + uv[b, 1], color)

    # bird's-eye panel: x to the right, z up
    top = img_h + 2 * pad

    def to_bev(x, z):
        return pad + (x - x0) * scale, top + (z1 - z) * scale

    c.rect(pad, top, bev_w, bev_h)
    cx, cy = to_bev(0.0, 0.0)
    c.circle(cx, min(cy, top + bev_h), 3)
    for tick in np.arange(z0, z1 + 1e-9, 10.0):
        _, ty = to_bev(x0, tick)
        c.text(pad + 2, ty - 2, f"{tick:g} m", 9)
    for pts in points:
        for x, _, z in np.asarray(pts)[:, :3]:
            px, py = to_bev(x, z)
            c.circle(px, py, 0.6, fill="gray")
    for boxes, color in ((gts, GT_COLOR), (dets, DET_COLOR)):
        for box in boxes:
            c.polyline([to_bev(x, z) for x, z in bev_footprint(box)], color, 1.5, closed=True)
    return c.render()
