import math

import numpy as np
import pytest

from monoprop.errors import FrameMismatch
from monoprop.frames import build_T_CO, camera_to_local, local_to_camera, rot_y
from monoprop.grid import CAMERA, LOCAL, InstanceGrid


def random_grid(rng, frame=LOCAL, shape=(6, 5)):
    mask = rng.random(shape) < 0.7
    pts = np.where(mask[..., None], rng.normal(0, 2, shape + (3,)), 0.0)
    G = rng.uniform(0, 500, shape + (2,))
    return InstanceGrid(pts, mask, G, frame)


def test_identity_transform():
    t = build_T_CO((0, 0, 0), 0.0)
    assert np.array_equal(t.matrix, np.eye(4))


def test_pure_translation():
    assert np.allclose(build_T_CO((0, 0, 20), 0.0).apply((1, 0, 0)), (1, 0, 20))


def test_quarter_turn():
    assert np.allclose(build_T_CO((0, 0, 20), math.pi / 2).apply((1, 0, 0)), (0, 0, 19),
                       atol=1e-12)


def test_centroid_maps_to_origin():
    t = build_T_CO((3, 1, 25), 0.3)
    assert np.allclose(t.apply_inverse((3, 1, 25)), 0, atol=1e-12)


def test_matrix_inverse_identity():
    t = build_T_CO((3, -1, 25), -0.7)
    assert np.abs(t.matrix @ t.inverse_matrix() - np.eye(4)).max() <= 1e-12


def test_round_trip_and_isometry(rng):
    pts = rng.normal(0, 3, (1000, 3))
    t = build_T_CO(rng.uniform(-20, 20, 3), rng.uniform(-math.pi, math.pi))
    assert np.abs(t.apply_inverse(t.apply(pts)) - pts).max() < 1e-9
    d0 = np.linalg.norm(pts[:50, None] - pts[None, :50], axis=-1)
    q = t.apply(pts[:50])
    assert np.abs(np.linalg.norm(q[:, None] - q[None, :], axis=-1) - d0).max() < 1e-9


def test_grid_round_trip_preserves_mask_and_G(rng):
    g = random_grid(rng)
    t = build_T_CO((1, 2, 30), 0.2)
    cam = local_to_camera(g, t)
    assert cam.frame == CAMERA
    back = camera_to_local(cam, t)
    assert np.abs(back.points - g.points).max() < 1e-9
    assert np.array_equal(back.mask, g.mask) and np.array_equal(back.G, g.G)


def test_frame_tags_block_double_application(rng):
    g = random_grid(rng)
    t = build_T_CO((1, 2, 30), 0.2)
    with pytest.raises(FrameMismatch):
        camera_to_local(g, t)
    with pytest.raises(FrameMismatch):
        local_to_camera(local_to_camera(g, t), t)


def test_rot_y_is_rotation():
    r = rot_y(0.9)
    assert np.allclose(r @ r.T, np.eye(3)) and np.linalg.det(r) == pytest.approx(1.0)


@pytest.mark.parametrize("frame", [LOCAL, CAMERA])
def test_binary_record_round_trip(rng, frame):
    g = random_grid(rng, frame, (48, 48))
    data = g.to_bytes()
    assert data[:4] == b"IGRD"
    assert len(data) == 11 + (48 * 48 + 7) // 8 + 4 * 5 * 48 * 48
    back = InstanceGrid.from_bytes(data)
    assert back.frame == frame and np.array_equal(back.mask, g.mask)
    assert np.allclose(back.points, g.points, rtol=1e-6, atol=1e-6)
    assert back.to_bytes() == data


def test_binary_record_rejects_garbage(rng):
    data = random_grid(rng).to_bytes()
    with pytest.raises(ValueError):
        InstanceGrid.from_bytes(b"XXXX" + data[4:])
    with pytest.raises(ValueError):
        InstanceGrid.from_bytes(data + b"\0")


def test_text_dump_lists_valid_cells(rng):
    g = random_grid(rng)
    lines = g.dump_text().splitlines()
    assert lines[0] == f"frame=local L=6 W=5 K={g.count}"
    assert len(lines) == 1 + g.count
