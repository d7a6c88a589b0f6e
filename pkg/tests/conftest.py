import numpy as np
import pytest

from csfusion.scene import ClassTable
from csfusion.synthetic import SceneSpec, default_intrinsics, make_scene, make_trajectory, render_frames


@pytest.fixture(scope="session")
def ct():
    return ClassTable.scannet20()


@pytest.fixture(scope="session")
def small_world(ct):
    """A sparse room seen by 8 low-resolution frames; cheap enough for many tests."""
    spec = SceneSpec(n_objects=4, density=400.0, rng_seed=3)
    cloud = make_scene(spec, ct)
    K = default_intrinsics(96, 72, 66.0)
    frames = render_frames(cloud, make_trajectory(spec, 8), K, ct, index_step=50)
    return spec, cloud, K, frames


def random_pose(rng):
    q = rng.normal(size=4)
    q /= np.linalg.norm(q)
    w, x, y, z = q
    R = np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
        [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
        [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
    ])
    T = np.eye(4)
    T[:3, :3] = R
    T[:3, 3] = rng.uniform(-5, 5, 3)
    return T


# Acceptance criteria record one line each; they are printed after the run.
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
