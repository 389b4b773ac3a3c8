from pathlib import Path

import numpy as np
import pytest

from monoprop.kitti_io import Box3D, CameraModel
from monoprop.synth import DEFAULT_CAMERA, scene_from_boxes

FIXTURES = Path(__file__).parent / "fixtures"
KITTI_FIXTURE = FIXTURES / "kitti"


@pytest.fixture
def simple_camera():
    return CameraModel.from_intrinsics(1000.0, 1000.0, 500.0, 300.0)


@pytest.fixture
def kitti_camera():
    return DEFAULT_CAMERA


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def ground_box(z, x=0.0, dims=(3.9, 1.53, 1.63), yaw=0.0, cls="Car", height=1.65):
    """Box resting on the ground plane ``height`` meters below the camera."""
    return Box3D(cls, (x, height - 0.5 * dims[1], z), dims, yaw)


def single_object_scene(box, camera=DEFAULT_CAMERA):
    return scene_from_boxes([box], camera)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
