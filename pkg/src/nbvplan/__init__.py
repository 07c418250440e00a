"""Coordinated multi-sensor next-best-view planning on a shared
log-odds occupancy map.

Candidate depth-camera views are scored by information gain along their
rays, a per-voxel visibility cache turns the scores into an
overlap-aware monotone submodular utility, and a greedy planner picks
one view per sensor (a partition-matroid constraint) with the classic
1/2 approximation guarantee. A small simulation layer runs closed-loop
exploration experiments on procedural multi-room scenes.
"""

from .grid import (Box, InverseSensorModel, VoxelGrid, apply_observation,
                   box_index_range, entropy, entropy_field, explored_stats,
                   load_grid, logit, new_grid, occupancy, occupancy_field,
                   roi_mask, save_grid)
from .planner import (IndependentSet, PlanResult, RunningBest, ViewPartition,
                      exhaustive_plan, greedy_plan, marginal_utility,
                      overlap_aware_utility, plan_result_to_dict, random_plan,
                      single_sensor_plan)
from .scoring import (PerVoxelGain, ScoreModel, VisibilityCache, build_cache,
                      gain_field, naive_view_score, per_voxel_gains,
                      ray_score, score_views_fast)
from .sensing import (CameraIntrinsics, DepthImage, RayTrace, ViewPose,
                      cast_view, default_intrinsics, load_depth_pgm, look_at,
                      observe_view, pixel_ray_direction, render_depth,
                      save_depth_pgm, stride_for_fraction, traverse,
                      update_from_depth, view_ray_directions)
from .simulation import (ExperimentConfig, MetricsSeries, SceneSpec, auc,
                         compute_observable_mask, generate_scene,
                         read_metrics_csv, run_episode, run_sweep,
                         sample_candidate_views, scene_interior,
                         summarize_rows, surface_coverage, voxelize_scene,
                         write_metrics_csv)

__version__ = "0.1.0"
