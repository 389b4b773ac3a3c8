import numpy as np
import pytest

from conftest import ground_box, single_object_scene
from monoprop.camera import project
from monoprop.errors import EmptyDepth, EmptyInstance
from monoprop.instance_data import (GRID_SIZE, InstancePoints, densify_depth, depth_to_scene,
                                    generate_instance, grid_source_pixels, make_instance_grid,
                                    points_in_box, segment_instance)
from monoprop.kitti_io import Box2D, Box3D, DepthMap
from monoprop.synth import DEFAULT_CAMERA


def test_densify_fixpoint():
    d = DepthMap(np.random.default_rng(0).uniform(1, 50, (20, 30)))
    assert np.array_equal(densify_depth(d).depth, d.depth)


def test_densify_single_pixel():
    z = np.zeros((10, 12))
    z[3, 4] = 7.5
    assert np.all(densify_depth(DepthMap(z)).depth == 7.5)


def test_densify_checkerboard_plane():
    z = np.full((40, 40), 10.0)
    z[(np.add.outer(np.arange(40), np.arange(40)) % 2).astype(bool)] = 0.0
    assert np.all(densify_depth(DepthMap(z)).depth == 10.0)


def test_densify_empty():
    with pytest.raises(EmptyDepth):
        densify_depth(DepthMap(np.zeros((4, 4))))


def test_depth_to_scene(simple_camera):
    z = np.zeros((600, 1000))
    z[299, 499] = 10.0
    z[10, 20] = 5.0
    scene = depth_to_scene(DepthMap(z), simple_camera)
    assert np.allclose(scene.points[299, 499], (-0.005, -0.005, 10.0))
    assert scene.valid.sum() == 2 and np.isnan(scene.points[0, 0]).all()
    uv = project(simple_camera, scene.points[10, 20])
    assert np.abs(uv - (20.5, 10.5)).max() < 1e-6


def test_point_on_face_is_inside():
    box = Box3D("Car", (0, 0, 10), (2, 2, 2), 0.0)
    assert points_in_box(np.array([[1.0, 0, 10], [0, -1, 10], [0, 0, 11]]), box).all()
    assert not points_in_box(np.array([[1.0 + 1e-6, 0, 10]]), box).any()


def test_segmentation_recovers_rendered_pixels():
    box = ground_box(15.0, x=1.0, yaw=0.4)
    scene = single_object_scene(box)
    inst = segment_instance(depth_to_scene(scene.depth, DEFAULT_CAMERA), box)
    rendered = set(zip(*np.nonzero(scene.owner == 0)))
    got = set(map(tuple, inst.pixels))
    assert len(got & rendered) >= 0.99 * len(rendered)
    assert not (got - rendered)


def test_empty_scene_raises():
    scene = depth_to_scene(DepthMap(np.full((50, 60), 120.0)), DEFAULT_CAMERA)
    with pytest.raises(EmptyInstance):
        segment_instance(scene, ground_box(10.0))


def _full_instance(box, offset=0):
    rows, cols = np.mgrid[int(box.v1):int(box.v2), int(box.u1):int(box.u2)]
    pix = np.stack([rows.ravel(), cols.ravel()], 1)
    pts = np.column_stack([pix[:, 1], pix[:, 0], np.full(len(pix), 5.0)]).astype(float)
    return InstancePoints(pix, pts)


def test_identity_resampling():
    box = Box2D(100, 40, 148, 88)
    grid = make_instance_grid(_full_instance(box), box)
    assert grid.mask.all()
    i, j = np.mgrid[0:48, 0:48]
    assert np.array_equal(grid.G[..., 0], 100 + j + 0.5)
    assert np.array_equal(grid.G[..., 1], 40 + i + 0.5)


def test_decimation_matches_brute_force():
    box = Box2D(100, 40, 196, 136)
    grid = make_instance_grid(_full_instance(box), box)
    for i in range(48):
        for j in range(48):
            u = 100 + (j + 0.5) * 2
            v = 40 + (i + 0.5) * 2
            # cell center falls on a pixel edge; the smaller index wins
            col = int(np.ceil(u)) - 1
            row = int(np.ceil(v)) - 1
            assert tuple(grid.G[i, j]) == (col + 0.5, row + 0.5)
            assert tuple(grid.points[i, j, :2]) == (col, row)


def test_source_pixels_deterministic():
    box = Box2D(10.3, 7.9, 83.1, 51.2)
    a = grid_source_pixels(box)
    b = grid_source_pixels(box)
    assert all(np.array_equal(x, y) for x, y in zip(a, b))


def test_generated_grid_projection_and_local_bound():
    box = ground_box(20.0, x=-3.0, yaw=1.1)
    scene = single_object_scene(box)
    obj = scene.objects[0]
    cam, local = generate_instance(depth_to_scene(scene.depth, DEFAULT_CAMERA), DEFAULT_CAMERA,
                                   obj.box2d, obj.box3d)
    assert cam.shape == GRID_SIZE
    uv = project(DEFAULT_CAMERA, cam.valid_points())
    assert np.abs(uv - cam.G[cam.mask]).max() <= 1e-6
    assert np.linalg.norm(local.valid_points(), axis=1).max() <= \
        0.5 * np.linalg.norm(box.dims) + 1e-9
    assert np.array_equal(local.G, cam.G) and np.array_equal(local.mask, cam.mask)


def test_generate_instance_k_min():
    box = ground_box(20.0)
    scene = single_object_scene(box)
    obj = scene.objects[0]
    with pytest.raises(EmptyInstance):
        generate_instance(depth_to_scene(scene.depth, DEFAULT_CAMERA), DEFAULT_CAMERA,
                          obj.box2d, obj.box3d, k_min=48 * 48 + 1)
