"""Parity checks: numba kernels against the pure python paths."""

import numpy as np
import pytest

import nbvplan as nv
from nbvplan import scoring as sc
from nbvplan import sensing as sn


def _scene(rng, res=0.1, extent=(2.0, 2.0, 1.5)):
    sensor = nv.InverseSensorModel()
    g = nv.new_grid(nv.Box([0, 0, 0], list(extent)), res, sensor)
    occ3 = g.view3d(np.zeros(g.n_cells, dtype=bool))
    for _ in range(int(rng.integers(2, 7))):
        lo = rng.uniform(0, np.asarray(extent) - 0.3)
        hi = lo + rng.uniform(0.1, 0.8, 3)
        r = nv.box_index_range(g, nv.Box(lo, np.minimum(hi, extent)))
        if r is not None:
            occ3[r[0][2]:r[1][2] + 1, r[0][1]:r[1][1] + 1,
                 r[0][0]:r[1][0] + 1] = True
    lm = sensor.l_max
    g.log_odds[:] = np.where(occ3.ravel(), lm, -lm)
    g.updated[:] = True
    return g


def _poses(rng, extent, n):
    out = []
    for _ in range(n):
        eye = rng.uniform(0.15, 0.85, 3) * extent
        target = rng.uniform(0.1, 0.9, 3) * extent
        if np.linalg.norm(target - eye) < 0.2:
            target = eye + [0.5, 0.1, 0.0]
        out.append(nv.look_at(eye, target))
    return out


def test_render_rays_matches_pure_traverse():
    rng = np.random.default_rng(11)
    intr = nv.default_intrinsics(32, 24, 75.0)
    for _ in range(10):
        gt = _scene(rng)
        pose = _poses(rng, np.array([2.0, 2.0, 1.5]), 1)[0]
        img = nv.render_depth(gt, pose, intr, max_range=4.0, sampling=(3, 3))
        occ = gt.log_odds > 0.0
        dirs = nv.view_ray_directions(pose, intr, img.pixel_xs, img.pixel_ys)
        want = np.empty(len(dirs))
        for r, d in enumerate(dirs):
            tr = nv.traverse(gt, pose.t, d, 4.0)
            tr = sn._truncate_at_occupied(gt, tr, occ)
            want[r] = tr.length if tr.terminal == "hit_surface" else np.inf
        assert np.array_equal(img.depths.ravel(), want)


def test_integrate_handles_no_return_rays():
    sensor = nv.InverseSensorModel()
    gt = nv.new_grid(nv.Box([0, 0, 0], [2.0, 2.0, 1.5]), 0.1, sensor)
    gt.log_odds[:] = -sensor.l_max
    gt.updated[:] = True
    intr = nv.default_intrinsics(16, 12, 70.0)
    pose = nv.look_at([0.2, 0.2, 0.75], [1.8, 1.8, 0.75])
    img = nv.render_depth(gt, pose, intr, max_range=1.0, sampling=(2, 2))
    assert np.all(np.isinf(img.depths))
    m = nv.new_grid(gt.bounds, gt.resolution, gt.sensor)
    m = nv.VoxelGrid(gt.origin.copy(), gt.resolution, gt.dims,
                     m.log_odds, m.updated, gt.sensor)
    nv.update_from_depth(m, pose, intr, img, max_range=1.0)
    # no-return rays integrate misses out to max_range, no hits anywhere
    assert m.updated.any()
    assert not np.any(m.log_odds > 0.0)
    assert np.all(m.log_odds[m.updated] <= gt.sensor.l_miss + 1e-12)
    # and nothing beyond max_range was touched
    centers = m.origin + (np.argwhere(m.view3d(m.updated))[:, ::-1] + 0.5) * m.resolution
    assert np.all(np.linalg.norm(centers - pose.t, axis=1) <= 1.0 + m.resolution * 2)


def _cache_pure(map_grid, poses, intr, model, sampling, max_range):
    traces = {i: nv.cast_view(map_grid, p, intr, sampling=sampling,
                              max_range=max_range)
              for i, p in poses.items()}
    return nv.build_cache(map_grid, traces, model)


def _partial_map(rng, gt, n_views=2):
    m = nv.new_grid(gt.bounds, gt.resolution, gt.sensor)
    m = nv.VoxelGrid(gt.origin.copy(), gt.resolution, gt.dims,
                     m.log_odds, m.updated, gt.sensor)
    intr = nv.default_intrinsics(24, 18, 75.0)
    for pose in _poses(rng, np.array([2.0, 2.0, 1.5]), n_views):
        nv.observe_view(m, gt, pose, intr, sampling=(2, 2), max_range=4.0)
    return m


@pytest.mark.parametrize("gain,weight", [("entropy", "unit"),
                                         ("unknown_indicator", "unit"),
                                         ("entropy", "occlusion_aware"),
                                         ("entropy", "roi_masked")])
def test_score_views_fast_matches_pure_cache(gain, weight):
    rng = np.random.default_rng(13)
    intr = nv.default_intrinsics(32, 24, 75.0)
    roi = nv.Box([0.3, 0.3, 0.2], [1.7, 1.7, 1.3])
    for _ in range(4):
        gt = _scene(rng)
        m = _partial_map(rng, gt)
        model = nv.ScoreModel(gain=gain, weight=weight,
                              roi=roi if weight == "roi_masked" else None)
        poses = _poses(rng, np.array([2.0, 2.0, 1.5]), 4)
        posed = dict(enumerate(poses))
        fast, fast_naive = nv.score_views_fast(m, posed, intr, model,
                                               sampling=(3, 3), max_range=4.0)
        traces = {i: nv.cast_view(m, p, intr, sampling=(3, 3), max_range=4.0)
                  for i, p in posed.items()}
        pure = nv.build_cache(m, traces, model)
        assert fast.view_ids() == pure.view_ids()
        for v in posed:
            want = nv.naive_view_score(model, m, traces[v])
            assert fast_naive[v] == pytest.approx(want, rel=1e-5, abs=1e-7)
        for v in fast.view_ids():
            fi, fg = fast.entries[v]
            pi, pg = pure.entries[v]
            assert set(fi.tolist()) == set(pi.tolist())
            order_f = np.argsort(fi)
            order_p = np.argsort(pi)
            np.testing.assert_allclose(fg[order_f], pg[order_p],
                                       rtol=2e-5, atol=2e-7)
            assert fast.totals[v] == pytest.approx(pure.totals[v],
                                                   rel=1e-5, abs=1e-7)


def test_score_views_fast_roi_masked():
    rng = np.random.default_rng(14)
    gt = _scene(rng)
    m = _partial_map(rng, gt)
    intr = nv.default_intrinsics(24, 18, 75.0)
    roi = nv.Box([0.4, 0.4, 0.2], [1.6, 1.6, 1.2])
    model = nv.ScoreModel(gain="entropy", weight="roi_masked", roi=roi)
    poses = _poses(rng, np.array([2.0, 2.0, 1.5]), 3)
    fast, _ = nv.score_views_fast(m, dict(enumerate(poses)), intr, model,
                                  sampling=(3, 3), max_range=4.0)
    mask = sc.roi_mask(m, roi)
    saw_outside = False
    for v in fast.view_ids():
        fi, fg = fast.entries[v]
        outside = ~mask[fi]
        saw_outside = saw_outside or bool(outside.any())
        assert np.all(fg[outside] == 0.0)
        assert fg[mask[fi]].sum() > 0
    assert saw_outside


def test_score_views_fast_empty_view():
    gt = _scene(np.random.default_rng(15))
    m = _partial_map(np.random.default_rng(16), gt)
    intr = nv.default_intrinsics(16, 12, 60.0)
    # camera outside the grid pointing away: no ray touches a cell
    pose = nv.look_at([-1.0, 1.0, 0.75], [-5.0, 1.0, 0.75])
    model = nv.ScoreModel(gain="entropy", weight="unit")
    cache, naive = nv.score_views_fast(m, {0: pose}, intr, model,
                                       sampling=(2, 2), max_range=2.0)
    idx, gains = cache.entries[0]
    assert len(idx) == 0 and len(gains) == 0
    assert cache.totals[0] == 0.0
    assert naive[0] == 0.0
