"""Monocular 3D detection geometry: proposals, instance point grids, consistency
losses, proposal refinement, and KITTI-protocol evaluation."""

from .camera import make_proposal, project, backproject, viewing_angles
from .kitti_io import Box2D, Box3D, CameraModel, DepthMap
from .refine import refine_pose, recover_tx

__all__ = ["Box2D", "Box3D", "CameraModel", "DepthMap", "backproject", "make_proposal",
           "project", "recover_tx", "refine_pose", "viewing_angles"]
