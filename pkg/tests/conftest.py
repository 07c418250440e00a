import numpy as np
import pytest

import nbvplan as nv


@pytest.fixture(scope="session", autouse=True)
def warm_kernels():
    """Compile the numba kernels once so timed tests measure steady state."""
    scene, gt = nv.generate_scene(123, room_count=1,
                                  bounds=nv.Box([0, 0, 0], [2.0, 2.0, 1.5]),
                                  resolution=0.25)
    intr = nv.default_intrinsics(16, 12, 60.0)
    pose = nv.look_at(np.array([1.0, 1.0, 0.75]), np.array([1.9, 1.0, 0.75]))
    m = nv.new_grid(scene.bounds, 0.25, gt.sensor)
    nv.observe_view(m, gt, pose, intr, sampling=(1, 1), max_range=3.0)
    for weight in ("unit", "occlusion_aware"):
        nv.score_views_fast(m, {0: pose}, intr, nv.ScoreModel(weight=weight),
                            sampling=(1, 1), max_range=3.0)
