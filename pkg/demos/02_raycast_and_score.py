"""Cast rays through a half-explored map and score candidate views.

Shows the two layers under the planner: ray traversal with occlusion at
confidently occupied voxels, and information-gain scoring of whole
views under different gain and weighting models.
"""

import nbvplan as nv
from nbvplan import simulation as sim


def main():
    scene, gt = sim.generate_scene(seed=11, room_count=2)
    sensor = nv.InverseSensorModel(p_hit=0.9, p_miss=0.1)
    map_grid = nv.new_grid(scene.bounds, gt.resolution, sensor)
    intr = nv.default_intrinsics()

    # explore one corner so some rays hit known walls and some hit unknown
    center = scene.bounds.center
    pose0 = nv.look_at(center + [-1.0, -1.0, 0.3], center)
    nv.observe_view(map_grid, gt, pose0, intr, sampling=0.2, max_range=8.0)

    # a single ray, cell by cell
    trace = nv.traverse(map_grid, pose0.t, pose0.R[:, 2], max_len=8.0)
    print(f"one ray: {len(trace.cells)} voxels, ends by {trace.terminal} "
          f"after {trace.length:.2f} m")

    # whole candidate views under different scoring models; the cache
    # total credits each voxel once, the naive sum counts every ray
    poses = {0: pose0,
             1: nv.look_at(center + [1.2, 0.8, 0.3], center + [0, 2, 0]),
             2: nv.look_at(center + [0.0, -1.5, 0.5], center + [2, 0, 0])}
    cache = None
    for gain in ("entropy", "unknown_indicator"):
        for weight in ("unit", "occlusion_aware"):
            model = nv.ScoreModel(gain=gain, weight=weight)
            cache, naive = nv.score_views_fast(map_grid, poses, intr, model,
                                               sampling=0.1, max_range=8.0)
            scores = ", ".join(f"view {v}: {cache.totals[v]:9.1f} "
                               f"(naive {naive[v]:9.1f})"
                               for v in sorted(poses))
            print(f"{gain:>17s}/{weight:<15s} {scores}")

    # overlap across views: shared voxels are also credited only once
    model = nv.ScoreModel(gain="entropy", weight="unit")
    cache, _ = nv.score_views_fast(map_grid, poses, intr, model,
                                   sampling=0.1, max_range=8.0)
    for a, b in ((0, 1), (0, 2), (1, 2)):
        pair = nv.overlap_aware_utility(cache, [a, b])
        solo = cache.totals[a] + cache.totals[b]
        print(f"views {a}+{b} together {pair:11.1f} vs independent sum "
              f"{solo:11.1f} ({100 * (1 - pair / solo):5.1f}% overlap)")


if __name__ == "__main__":
    main()
