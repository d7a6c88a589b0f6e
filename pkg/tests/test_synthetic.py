import numpy as np
import pytest

from csfusion.projection import rasterize
from csfusion.scene import CameraPose, load_frame, load_scene
from csfusion.synthetic import (
    SceneSpec,
    SceneTooCrowded,
    default_intrinsics,
    emit_dataset,
    look_at,
    make_dumbbell,
    make_scene,
    make_trajectory,
    scene_layout,
)


def test_empty_room_labels(ct):
    cloud = make_scene(SceneSpec(n_objects=0, density=200.0), ct)
    assert set(np.unique(cloud.gt_labels)) == {ct.index("wall"), ct.index("floor")}


def test_point_count_matches_area():
    spec = SceneSpec(room=(4.0, 4.0, 2.5), density=500.0, rng_seed=4)
    cloud = make_scene(spec)
    expect = scene_layout(spec).surface_area() * spec.density
    assert abs(len(cloud) - expect) <= 0.05 * expect
    empty = SceneSpec(room=(4.0, 4.0, 2.5), n_objects=0, density=500.0)
    # floor 16 m^2 plus walls 4 * 4 * 2.5 m^2
    assert abs(len(make_scene(empty)) - 56 * 500) <= 0.05 * 56 * 500


def test_same_seed_same_cloud():
    a, b = make_scene(SceneSpec(density=300.0, rng_seed=9)), make_scene(SceneSpec(density=300.0, rng_seed=9))
    assert np.array_equal(a.positions, b.positions) and np.array_equal(a.gt_labels, b.gt_labels)
    assert np.array_equal(a.colors, b.colors)


def test_every_point_has_a_real_label(ct):
    cloud = make_scene(SceneSpec(density=300.0), ct)
    assert cloud.gt_labels.min() >= 0 and cloud.gt_labels.max() < ct.m


def test_cuboids_disjoint_and_inside():
    spec = SceneSpec(n_objects=10, rng_seed=2)
    objs = scene_layout(spec).objects
    for i, a in enumerate(objs):
        assert all(0 <= a.lo[k] < a.hi[k] <= spec.room[k] for k in range(3))
        for b in objs[i + 1:]:
            assert not a.overlaps(b)


def test_points_inside_room():
    spec = SceneSpec(density=300.0, rng_seed=5)
    p = make_scene(spec).positions
    assert (p >= -1e-12).all() and (p <= np.array(spec.room) + 1e-12).all()


def test_too_crowded():
    with pytest.raises(SceneTooCrowded, match="scene too crowded"):
        make_scene(SceneSpec(room=(1.0, 1.0, 2.0), n_objects=6))


def test_trajectory_poses_rigid_and_smooth():
    spec = SceneSpec()
    assert len(make_trajectory(spec, 1)) == 1
    poses = make_trajectory(spec, 30)
    eyes = np.array([p.translation for p in poses])
    steps = np.linalg.norm(np.diff(eyes, axis=0), axis=1)
    assert steps.max() < 0.3 and steps.max() / steps.min() < 1.01
    for p in poses:
        CameraPose(p.matrix)  # re-validates rigidity
        assert 0 < p.translation[0] < spec.room[0] and 0 < p.translation[1] < spec.room[1]
    with pytest.raises(ValueError):
        make_trajectory(spec, 0)


def test_look_at_points_z_forward():
    pose = look_at((0.0, 0.0, 1.0), (2.0, 0.0, 1.0))
    assert np.allclose(pose.rotation[:, 2], [1, 0, 0])
    assert np.allclose(pose.rotation[:, 1], [0, 0, -1])  # image y points down


def test_emit_dataset_round_trip(tmp_path, ct):
    spec = SceneSpec(n_objects=3, density=300.0, rng_seed=1)
    K = default_intrinsics(64, 48, 44.0)
    ds = emit_dataset(spec, 4, K, tmp_path, ct)
    assert ds.frame_indices == [0, 50, 100, 150]
    cloud = load_scene(ds.scene_path, ct)
    assert np.array_equal(cloud.positions, make_scene(spec, ct).positions)
    poses = make_trajectory(spec, 4)
    for i, pose in zip(ds.frame_indices, poses):
        f = load_frame(ds.frames_dir, i, ct)
        depth, _ = rasterize(cloud, K, pose, 1)
        assert np.array_equal(f.depth.values, depth)
        assert f.mask is not None and f.color is not None


def test_emit_is_byte_deterministic(tmp_path, ct):
    spec = SceneSpec(n_objects=2, density=200.0, rng_seed=6)
    K = default_intrinsics(32, 24, 22.0)
    emit_dataset(spec, 2, K, tmp_path / "a", ct)
    emit_dataset(spec, 2, K, tmp_path / "b", ct)
    for f in sorted((tmp_path / "a").rglob("*")):
        if f.is_file():
            assert f.read_bytes() == (tmp_path / "b" / f.relative_to(tmp_path / "a")).read_bytes()


def test_dumbbell_fixture_shape():
    f = make_dumbbell(np.random.default_rng(0))
    assert f.image.shape == (96, 96, 3) and f.instance.any()
    assert np.array_equal(f.gt.values == 6, f.instance)
    from scipy import ndimage

    assert ndimage.label(f.instance)[1] == 1
