
import numpy as np
import pytest

from monoprop.camera import proposal_depth
from monoprop.errors import PlacementFailure
from monoprop.evaluation import iou_3d
from monoprop.kitti_io import Box3D, CameraModel, parse_labels
from monoprop.synth import (SceneSpec, generate_scene, jitter_box, oracle_monte_carlo_iou,
                            oracle_numeric_gradient, projected_box2d, render_depth,
                            split_seeds)


def test_rendered_height_matches_pinhole():
    cam = CameraModel.from_intrinsics(1000, 1000, 500, 300)
    box = Box3D("Car", (0, 0, 20), (1.0, 2.0, 0.02), 0.0)
    _, owner = render_depth(cam, [box], (1000, 600))
    rows = np.nonzero((owner == 0).any(axis=1))[0]
    h_hat = rows.max() - rows.min() + 1
    assert abs(h_hat - 100) <= 1
    assert proposal_depth(1000, 2.0, h_hat) == pytest.approx(20.0, rel=2 / h_hat)


def test_empty_scene_is_background():
    scene = generate_scene(SceneSpec(seed=3, num_objects=0))
    assert np.all(scene.depth.depth == 120.0) and scene.objects == []


def test_same_seed_bit_identical():
    a, b = generate_scene(SceneSpec(seed=11)), generate_scene(SceneSpec(seed=11))
    assert np.array_equal(a.depth.depth, b.depth.depth)
    assert a.labels_text() == b.labels_text()


def test_boxes_do_not_overlap_and_labels_parse():
    scene = generate_scene(SceneSpec(seed=5, num_objects=6))
    boxes = scene.boxes
    for i in range(len(boxes)):
        for j in range(i + 1, len(boxes)):
            assert iou_3d(boxes[i], boxes[j]) == 0.0
    assert len(parse_labels(scene.labels_text()).objects) == len(scene.objects)


def test_placement_failure():
    scene_spec = SceneSpec(seed=0, num_objects=30, z_range=(5.0, 6.0), max_tries=5)
    with pytest.raises(PlacementFailure):
        generate_scene(scene_spec)


def test_spec_validation():
    with pytest.raises(ValueError):
        SceneSpec(z_range=(0.0, 10.0))


def test_split_seeds_deterministic():
    assert split_seeds(7, 5) == split_seeds(7, 5)
    assert len(set(split_seeds(7, 5))) == 5


def test_monte_carlo_oracle_cases():
    a = Box3D("Car", (0, 1, 20), (2, 1.5, 2), 0.0)
    iou, se = oracle_monte_carlo_iou(a, a, 20_000)
    assert iou == 1.0
    assert oracle_monte_carlo_iou(a, a.replace(center=(10, 1, 20)), 20_000)[0] == 0.0
    half = a.replace(center=(0, 1.75, 20))
    iou, se = oracle_monte_carlo_iou(a, half, 200_000, seed=1)
    assert abs(iou - 1 / 3) <= 3 * se
    with pytest.raises(ValueError):
        oracle_monte_carlo_iou(a, a, 100)


def test_numeric_gradient_oracle():
    assert oracle_numeric_gradient(lambda x: x[0] ** 2, [3.0])[0] == pytest.approx(6.0, abs=1e-8)
    assert np.all(oracle_numeric_gradient(lambda x: 4.0, [1.0, 2.0]) == 0.0)


def test_projected_box_truncation():
    box = Box3D("Car", (-9, 0.9, 10), (3.9, 1.5, 1.6), 0.0)
    b2, trunc = projected_box2d(generate_scene(SceneSpec(num_objects=0)).camera, box)
    assert b2.u1 == 0.0 and 0 < trunc < 1


def test_jitter_keeps_overlap(rng):
    from monoprop.evaluation import box2d_iou
    from monoprop.kitti_io import Box2D
    b = Box2D(100, 100, 180, 150)
    for _ in range(50):
        assert box2d_iou(jitter_box(b, rng, 0.1), b) >= 0.7
