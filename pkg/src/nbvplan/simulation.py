"""Procedural scenes, the closed-loop planning experiment, and metrics.

Scenes are unions of axis-aligned boxes: a walled shell with floor and
ceiling, optional dividing walls with door openings, and box obstacles,
voxelized by cell-center membership into a saturated binary grid. An
episode shares one belief map across sensors: candidate views are scored
against the map each round, the configured method picks one view per
sensor, the chosen views are rendered against the ground truth and
integrated, and the picked candidates leave the pool.

Explored fractions are normalized by the set of cells observable from
the full candidate set (the reconstruction everything-integrated run),
with the raw interior fraction reported alongside.
"""

from __future__ import annotations

import csv
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import ndimage, stats

from .grid import (Box, InverseSensorModel, VoxelGrid, box_index_range,
                   new_grid, roi_mask)
from .planner import (ViewPartition, argmax_per_block, greedy_plan,
                      random_plan)
from .scoring import ScoreModel, score_views_fast
from .sensing import (CameraIntrinsics, ViewPose, default_intrinsics,
                      look_at, observe_view, stride_for_fraction)

DEFAULT_BOUNDS = Box(np.zeros(3), np.array([8.0, 8.0, 3.0]))
WALL_THICKNESS = 0.1
DOOR_WIDTH = 0.9
DOOR_HEIGHT = 2.0
MIN_ROOM_SPAN = 1.5
METHODS = ("ours", "single", "random")

CSV_COLUMNS = ("scene_seed", "method", "run_seed", "round",
               "views_per_sensor", "explored_frac", "surface_cov",
               "unknown_cm3", "plan_time_s", "explored_frac_grid")


@dataclass
class SceneSpec:
    """Procedural scene: bounding box plus occupied boxes."""

    bounds: Box
    boxes: list
    seed: int
    room_count: int

    def __post_init__(self):
        if not self.boxes:
            raise ValueError("scene needs at least one box")
        for b in self.boxes:
            if np.any(b.lo < self.bounds.lo) or np.any(b.hi > self.bounds.hi):
                raise ValueError("scene boxes must lie inside the bounds")

    def to_dict(self) -> dict:
        return {"bounds": self.bounds.to_dict(), "seed": self.seed,
                "room_count": self.room_count,
                "boxes": [b.to_dict() for b in self.boxes]}

    @staticmethod
    def from_dict(d: dict) -> "SceneSpec":
        return SceneSpec(bounds=Box.from_dict(d["bounds"]),
                         boxes=[Box.from_dict(b) for b in d["boxes"]],
                         seed=int(d["seed"]), room_count=int(d["room_count"]))


def scene_interior(scene: SceneSpec) -> Box:
    """The region inside the shell walls, used as the metrics roi."""
    wt = WALL_THICKNESS
    return Box(scene.bounds.lo + wt, scene.bounds.hi - wt)


@dataclass(frozen=True)
class ExperimentConfig:
    """Closed-loop experiment parameters.

    rounds counts the total views per sensor including the shared initial
    random ones, so the default plans rounds - initial_random_views times.
    """

    sensors: int = 4
    candidates_per_sensor: int = 20
    rounds: int = 20
    p_hit: float = 0.9
    p_miss: float = 0.1
    l_max: float = 10.0
    resolution: float = 0.05
    max_range: float = 10.0
    ray_fraction: float = 0.1
    gain: str = "entropy"
    weight: str = "unit"
    method: str = "ours"
    initial_random_views: int = 1
    pose_mode: str = "circle"
    pose_radius: float | None = None
    pose_height: float = 1.5
    image_width: int = 320
    image_height: int = 240
    hfov_deg: float = 60.0

    def __post_init__(self):
        if self.sensors < 1:
            raise ValueError("sensors must be >= 1")
        if self.candidates_per_sensor < 1:
            raise ValueError("candidates_per_sensor must be >= 1")
        if self.rounds < 0:
            raise ValueError("rounds must be >= 0")
        if self.initial_random_views < 1:
            raise ValueError("initial_random_views must be >= 1")
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.pose_mode not in ("circle", "hemisphere"):
            raise ValueError(f"unknown pose_mode {self.pose_mode!r}")
        if not 0.0 < self.ray_fraction <= 1.0:
            raise ValueError("ray_fraction must lie in (0, 1]")
        # delegate probability and resolution validation
        self.sensor_model()
        ScoreModel(gain=self.gain, weight=self.weight)
        if self.resolution <= 0:
            raise ValueError("resolution must be positive")

    def sensor_model(self) -> InverseSensorModel:
        return InverseSensorModel(self.p_hit, self.p_miss, self.l_max)

    def intrinsics(self) -> CameraIntrinsics:
        return default_intrinsics(self.image_width, self.image_height,
                                  self.hfov_deg)

    def score_model(self) -> ScoreModel:
        return ScoreModel(gain=self.gain, weight=self.weight)

    def stride(self) -> tuple:
        return stride_for_fraction(self.ray_fraction)


@dataclass
class MetricsSeries:
    """Per-round metrics of one episode plus its identity columns."""

    method: str
    scene_seed: int
    run_seed: int
    views_per_sensor: list = field(default_factory=list)
    explored_frac: list = field(default_factory=list)
    explored_frac_grid: list = field(default_factory=list)
    surface_cov: list = field(default_factory=list)
    unknown_cm3: list = field(default_factory=list)
    plan_time_s: list = field(default_factory=list)
    truncated: bool = False

    def auc_explored(self) -> float:
        return auc(self.explored_frac)

    def auc_surface(self) -> float:
        return auc(self.surface_cov)

    def rows(self) -> list:
        out = []
        for r in range(len(self.views_per_sensor)):
            out.append({
                "scene_seed": self.scene_seed, "method": self.method,
                "run_seed": self.run_seed, "round": r,
                "views_per_sensor": self.views_per_sensor[r],
                "explored_frac": self.explored_frac[r],
                "surface_cov": self.surface_cov[r],
                "unknown_cm3": self.unknown_cm3[r],
                "plan_time_s": self.plan_time_s[r],
                "explored_frac_grid": self.explored_frac_grid[r],
            })
        return out


def auc(values) -> float:
    """Discrete area under a per-round series: mean value times 100."""
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        raise ValueError("auc of an empty series")
    return float(v.mean() * 100.0)


# ---------------------------------------------------------------------------
# scene generation


def _shell_boxes(bounds: Box) -> list:
    lo, hi = bounds.lo, bounds.hi
    wt = WALL_THICKNESS
    return [
        Box(lo, [hi[0], hi[1], lo[2] + wt]),                    # floor
        Box([lo[0], lo[1], hi[2] - wt], hi),                    # ceiling
        Box(lo, [lo[0] + wt, hi[1], hi[2]]),                    # x low wall
        Box([hi[0] - wt, lo[1], lo[2]], hi),                    # x high wall
        Box(lo, [hi[0], lo[1] + wt, hi[2]]),                    # y low wall
        Box([lo[0], hi[1] - wt, lo[2]], hi),                    # y high wall
    ]


def _divider_boxes(bounds: Box, room_count: int, rng) -> list:
    lo, hi = bounds.lo, bounds.hi
    wt = WALL_THICKNESS
    span = hi[0] - lo[0] - 2 * wt
    boxes = []
    for k in range(1, room_count):
        xc = lo[0] + wt + span * k / room_count
        x_lo, x_hi = xc - wt / 2, xc + wt / 2
        door_margin = wt + DOOR_WIDTH / 2 + 0.2
        yc = rng.uniform(lo[1] + door_margin, hi[1] - door_margin)
        y_door_lo, y_door_hi = yc - DOOR_WIDTH / 2, yc + DOOR_WIDTH / 2
        z_door_top = lo[2] + wt + DOOR_HEIGHT
        boxes.append(Box([x_lo, lo[1], lo[2]], [x_hi, y_door_lo, hi[2]]))
        boxes.append(Box([x_lo, y_door_hi, lo[2]], [x_hi, hi[1], hi[2]]))
        if z_door_top < hi[2]:
            boxes.append(Box([x_lo, y_door_lo, z_door_top],
                             [x_hi, y_door_hi, hi[2]]))
    return boxes


def _obstacle_boxes(bounds: Box, rng) -> list:
    lo, hi = bounds.lo, bounds.hi
    wt = WALL_THICKNESS
    count = int(rng.integers(3, 11))
    boxes = []
    for _ in range(count):
        sx = rng.uniform(0.3, 1.0)
        sy = rng.uniform(0.3, 1.0)
        h = rng.uniform(0.4, 1.5)
        cx = rng.uniform(lo[0] + wt + sx / 2, hi[0] - wt - sx / 2)
        cy = rng.uniform(lo[1] + wt + sy / 2, hi[1] - wt - sy / 2)
        z0 = lo[2] + wt
        boxes.append(Box([cx - sx / 2, cy - sy / 2, z0],
                         [cx + sx / 2, cy + sy / 2, min(z0 + h, hi[2])]))
    return boxes


def voxelize_scene(scene: SceneSpec, resolution: float = 0.05,
                   sensor: InverseSensorModel | None = None) -> VoxelGrid:
    """Binary ground-truth grid: cells whose centers fall in any box are
    saturated at +l_max, the rest at -l_max, and all flagged updated."""
    gt = new_grid(scene.bounds, resolution, sensor)
    occ3 = gt.view3d(np.zeros(gt.n_cells, dtype=bool))
    for box in scene.boxes:
        rng = box_index_range(gt, box)
        if rng is None:
            continue
        lo, hi = rng
        occ3[lo[2]:hi[2] + 1, lo[1]:hi[1] + 1, lo[0]:hi[0] + 1] = True
    occ = occ3.ravel()
    lm = gt.sensor.l_max
    gt.log_odds[:] = np.where(occ, lm, -lm)
    gt.updated[:] = True
    return gt


def _free_space_connected(gt: VoxelGrid) -> bool:
    free3 = gt.view3d(gt.log_odds < 0.0).copy()
    if not free3.any():
        return False
    structure = ndimage.generate_binary_structure(3, 1)
    _, n_labels = ndimage.label(free3, structure=structure)
    return n_labels == 1


def generate_scene(seed: int, room_count: int = 1, bounds: Box | None = None,
                   resolution: float = 0.05,
                   sensor: InverseSensorModel | None = None,
                   max_retries: int = 20):
    """Deterministic procedural scene and its voxelized ground truth.

    Builds the shell, room_count - 1 dividing walls with door openings,
    and 3 to 10 box obstacles, then checks that all free space forms one
    connected component (every spot is reachable through the doors).
    Layouts failing the check are resampled from the same stream.
    """
    if bounds is None:
        bounds = DEFAULT_BOUNDS
    if room_count < 1:
        raise ValueError("room_count must be >= 1")
    if np.any(bounds.extent <= 0):
        raise ValueError("bounds must have positive extent")
    span = bounds.extent[0] - 2 * WALL_THICKNESS
    if span / room_count < MIN_ROOM_SPAN:
        raise ValueError(f"bounds too small for {room_count} rooms "
                         f"(needs {MIN_ROOM_SPAN} m per room)")
    rng = np.random.default_rng(seed)
    shell = _shell_boxes(bounds)
    for _ in range(max_retries):
        boxes = shell + _divider_boxes(bounds, room_count, rng) \
            + _obstacle_boxes(bounds, rng)
        scene = SceneSpec(bounds=bounds, boxes=boxes, seed=seed,
                          room_count=room_count)
        gt = voxelize_scene(scene, resolution, sensor)
        if _free_space_connected(gt):
            return scene, gt
    raise RuntimeError(f"could not generate a connected scene for seed {seed}")


# ---------------------------------------------------------------------------
# candidate views


def sample_candidate_views(config: ExperimentConfig, scene: SceneSpec,
                           seed: int, ground_truth: VoxelGrid | None = None
                           ) -> ViewPartition:
    """Candidate poses around the scene, interleaved into sensor blocks.

    Poses sit on a circle (or an upper hemisphere in hemisphere mode)
    around the scene center and aim at it. Block i takes every n-th pose
    by angular index, so each block spans the whole trajectory. Poses
    landing inside occupied cells are jittered until free.
    """
    gt = ground_truth if ground_truth is not None \
        else voxelize_scene(scene, config.resolution, config.sensor_model())
    rng = np.random.default_rng([seed, scene.seed, 101])
    total = config.sensors * config.candidates_per_sensor
    center = scene.bounds.center
    ext = scene.bounds.extent
    radius = config.pose_radius if config.pose_radius is not None \
        else 0.38 * min(ext[0], ext[1])
    interior = scene_interior(scene)
    phase = rng.uniform(0.0, 2.0 * math.pi)
    golden = math.pi * (3.0 - math.sqrt(5.0))

    poses = {}
    for idx in range(total):
        pos = None
        for attempt in range(100):
            if config.pose_mode == "circle":
                theta = phase + 2.0 * math.pi * idx / total
                r = radius
                h = config.pose_height + scene.bounds.lo[2]
                if attempt > 0:
                    theta += rng.uniform(-math.pi, math.pi) / total
                    r = radius * rng.uniform(0.6, 1.05)
                    h += rng.uniform(-0.5, 0.5)
                cand = np.array([center[0] + r * math.cos(theta),
                                 center[1] + r * math.sin(theta), h])
            else:
                u = (idx + 0.5) / total
                theta = phase + golden * idx
                r = radius
                if attempt > 0:
                    theta += rng.uniform(-0.5, 0.5)
                    r = radius * rng.uniform(0.6, 1.05)
                    u = rng.uniform(0.05, 0.95)
                ring = math.sqrt(max(1.0 - u * u, 0.0))
                cand = center + r * np.array([ring * math.cos(theta),
                                              ring * math.sin(theta), u])
            inside = interior.contains(cand)
            if inside:
                cell = gt.world_to_index(cand)
                if gt.in_bounds(cell) and gt.log_odds[gt.flat_index(cell)] < 0:
                    pos = cand
                    break
        if pos is None:
            raise RuntimeError(f"no free pose found for candidate {idx}")
        poses[idx] = look_at(pos, center)

    blocks = [[idx for idx in range(total) if idx % config.sensors == i]
              for i in range(config.sensors)]
    return ViewPartition(blocks=blocks, poses=poses)


def compute_observable_mask(ground_truth: VoxelGrid,
                            partition: ViewPartition,
                            config: ExperimentConfig) -> np.ndarray:
    """Cells reached when depth images from every candidate pose are
    integrated into a fresh map: the explored-fraction denominator."""
    n = ground_truth.n_cells
    scratch = VoxelGrid(origin=ground_truth.origin.copy(),
                        resolution=ground_truth.resolution,
                        dims=ground_truth.dims,
                        log_odds=np.zeros(n, dtype=np.float64),
                        updated=np.zeros(n, dtype=bool),
                        sensor=config.sensor_model())
    intr = config.intrinsics()
    for pose in partition.poses.values():
        observe_view(scratch, ground_truth, pose, intr,
                     sampling=config.stride(), max_range=config.max_range)
    return scratch.updated


# ---------------------------------------------------------------------------
# surface coverage


_SIX = ((1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1))


def _shift3(a: np.ndarray, di: int, dj: int, dk: int) -> np.ndarray:
    """Zero-padded shift of a [k, j, i] array by a cell offset."""
    out = np.zeros_like(a)
    src = [slice(None)] * 3
    dst = [slice(None)] * 3
    for axis, d in ((2, di), (1, dj), (0, dk)):
        if d > 0:
            dst[axis] = slice(d, None)
            src[axis] = slice(None, -d)
        elif d < 0:
            dst[axis] = slice(None, d)
            src[axis] = slice(-d, None)
    out[tuple(dst)] = a[tuple(src)]
    return out


def _coverage_offsets(resolution: float, tol: float) -> list:
    r = int(math.floor(tol / resolution + 1e-9))
    offs = []
    for di in range(-r, r + 1):
        for dj in range(-r, r + 1):
            for dk in range(-r, r + 1):
                d2 = (di * di + dj * dj + dk * dk) * resolution * resolution
                if d2 <= tol * tol * (1.0 + 1e-12):
                    offs.append((di, dj, dk))
    return offs


def _surface_table(ground_truth: VoxelGrid, tol: float):
    """Surface cell ids and, per surface cell, the flat ids of all cells
    within tol of its center (itself included)."""
    occ3 = ground_truth.view3d(ground_truth.log_odds > 0.0)
    free3 = ~occ3
    near_free = np.zeros_like(occ3)
    for di, dj, dk in _SIX:
        near_free |= _shift3(free3, di, dj, dk)
    surf3 = occ3 & near_free
    surf_flat = np.flatnonzero(surf3.ravel())
    if surf_flat.size == 0:
        raise ValueError("scene has no surface cells")
    ijk = ground_truth.unflatten(surf_flat)
    offsets = _coverage_offsets(ground_truth.resolution, tol)
    dims = np.asarray(ground_truth.dims)
    table = np.empty((surf_flat.size, len(offsets)), dtype=np.int64)
    for c, off in enumerate(offsets):
        nb = ijk + np.asarray(off)
        valid = np.all((nb >= 0) & (nb < dims), axis=1)
        flat = ground_truth.flat_index(np.where(valid[:, None], nb, ijk))
        table[:, c] = flat
    return surf_flat, table


def surface_coverage(ground_truth: VoxelGrid, map_grid: VoxelGrid,
                     tol: float = 0.05) -> float:
    """Fraction of ground-truth surface cells with a believed-occupied map
    cell within tol of their centers.

    Surface cells are occupied cells 6-adjacent to free space. The
    distance test is inclusive, so at tol equal to the resolution a hit
    in a face neighbor counts.
    """
    if map_grid.dims != ground_truth.dims or \
            not np.array_equal(map_grid.origin, ground_truth.origin):
        raise ValueError("grids must share the world frame")
    _, table = _surface_table(ground_truth, tol)
    rec = map_grid.log_odds > 0.0
    return float(rec[table].any(axis=1).mean())


# ---------------------------------------------------------------------------
# episodes


def run_episode(config: ExperimentConfig, scene: SceneSpec, run_seed: int,
                ground_truth: VoxelGrid | None = None,
                partition: ViewPartition | None = None,
                observable: np.ndarray | None = None) -> MetricsSeries:
    """One closed-loop experiment on a shared map.

    The initial random views are drawn from a stream independent of the
    method, so all methods start from the same belief. Each planned round
    scores the remaining candidates against the current map, selects one
    view per sensor by the configured method, integrates the rendered
    depth images, and drops the chosen candidates. Stops early with the
    truncation flag when a block runs out of views.
    """
    sensor = config.sensor_model()
    gt = ground_truth if ground_truth is not None \
        else voxelize_scene(scene, config.resolution, sensor)
    if partition is None:
        partition = sample_candidate_views(config, scene, run_seed, gt)
    if observable is None:
        observable = compute_observable_mask(gt, partition, config)

    intr = config.intrinsics()
    stride = config.stride()
    model = config.score_model()
    map_grid = new_grid(scene.bounds, config.resolution, sensor)

    roi = scene_interior(scene)
    roim = roi_mask(gt, roi)
    roi_count = int(roim.sum())
    obs_roi = observable & roim
    denom = max(int(obs_roi.sum()), 1)
    voxel_cm3 = (config.resolution * 100.0) ** 3
    surf_flat, surf_table = _surface_table(gt, tol=config.resolution)

    series = MetricsSeries(method=config.method, scene_seed=scene.seed,
                           run_seed=run_seed)

    def record(views, plan_time):
        upd = map_grid.updated
        in_roi = int(upd[roim].sum())
        rec = map_grid.log_odds > 0.0
        series.views_per_sensor.append(views)
        series.explored_frac.append(float((upd & obs_roi).sum()) / denom)
        series.explored_frac_grid.append(in_roi / roi_count)
        series.surface_cov.append(float(rec[surf_table].any(axis=1).mean()))
        series.unknown_cm3.append((roi_count - in_roi) * voxel_cm3)
        series.plan_time_s.append(plan_time)

    rng_init = np.random.default_rng([run_seed, scene.seed, 3])
    rng_rounds = np.random.default_rng([run_seed, scene.seed, 7])

    blocks = [sorted(b) for b in partition.blocks]
    for block in blocks:
        take = min(config.initial_random_views, len(block))
        picks = rng_init.choice(len(block), size=take, replace=False)
        for v in sorted(block[int(p)] for p in picks):
            observe_view(map_grid, gt, partition.poses[v], intr,
                         sampling=stride, max_range=config.max_range)
            block.remove(v)
    record(config.initial_random_views, 0.0)

    planned = max(0, config.rounds - config.initial_random_views)
    for r in range(planned):
        if any(len(b) == 0 for b in blocks):
            series.truncated = True
            break
        t0 = time.perf_counter()
        live = ViewPartition(blocks=blocks, poses=partition.poses)
        if config.method == "random":
            chosen = random_plan(live, rng_rounds)
        else:
            remaining = {v: partition.poses[v] for b in blocks for v in b}
            cache, naive = score_views_fast(map_grid, remaining, intr, model,
                                            sampling=stride,
                                            max_range=config.max_range)
            if config.method == "ours":
                chosen = greedy_plan(live, cache).chosen
            else:
                chosen = argmax_per_block(blocks, naive)
        plan_time = time.perf_counter() - t0
        for b, v in chosen.selections:
            observe_view(map_grid, gt, partition.poses[v], intr,
                         sampling=stride, max_range=config.max_range)
            blocks[b].remove(v)
        record(config.initial_random_views + r + 1, plan_time)
    return series


# ---------------------------------------------------------------------------
# sweeps and aggregation


def _sweep_pair(args):
    config, scene_seed, run_seed, methods, room_count, bounds_d = args
    bounds = Box.from_dict(bounds_d) if bounds_d else None
    scene, gt = generate_scene(scene_seed, room_count, bounds,
                               config.resolution, config.sensor_model())
    partition = sample_candidate_views(config, scene, run_seed, gt)
    observable = compute_observable_mask(gt, partition, config)
    rows = []
    for method in methods:
        cfg = replace(config, method=method)
        series = run_episode(cfg, scene, run_seed, ground_truth=gt,
                             partition=partition, observable=observable)
        rows.extend(series.rows())
    return rows


def run_sweep(config: ExperimentConfig, scene_seeds, run_seeds,
              methods=METHODS, room_count: int = 3, bounds: Box | None = None,
              jobs: int = 1, row_sink=None) -> list:
    """Scene x seed x method sweep sharing scene, candidate poses, and the
    observability denominator within each (scene, seed) pair.

    row_sink, when given, receives each completed pair's rows as they
    finish, so callers can persist partial progress.
    """
    for m in methods:
        if m not in METHODS:
            raise ValueError(f"unknown method {m!r}")
    bounds_d = bounds.to_dict() if bounds is not None else None
    tasks = [(config, ss, rs, tuple(methods), room_count, bounds_d)
             for ss in scene_seeds for rs in run_seeds]
    rows = []

    def consume(chunks):
        for chunk in chunks:
            rows.extend(chunk)
            if row_sink is not None:
                row_sink(chunk)

    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            consume(pool.map(_sweep_pair, tasks))
    else:
        consume(map(_sweep_pair, tasks))
    return rows


def write_metrics_csv(rows, path) -> None:
    """Metrics CSV with one row per episode round, full float precision."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for row in rows:
            writer.writerow([repr(row[c]) if isinstance(row[c], float)
                             else row[c] for c in CSV_COLUMNS])


def read_metrics_csv(path) -> list:
    int_cols = {"scene_seed", "run_seed", "round", "views_per_sensor"}
    rows = []
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            row = {}
            for key, val in rec.items():
                if key == "method":
                    row[key] = val
                elif key in int_cols:
                    row[key] = int(val)
                else:
                    row[key] = float(val)
            rows.append(row)
    return rows


def _t_half_width(samples) -> float | None:
    """95% confidence half-width of the mean, Student-t over the samples."""
    v = np.asarray(samples, dtype=float)
    if v.size < 2:
        return None
    t = stats.t.ppf(0.975, v.size - 1)
    return float(t * v.std(ddof=1) / math.sqrt(v.size))


def _pooled_half_width(a, b) -> float | None:
    """Two-sample pooled 95% half-width for a difference of means."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.size < 2 or b.size < 2:
        return None
    n, m = a.size, b.size
    sp2 = ((n - 1) * a.var(ddof=1) + (m - 1) * b.var(ddof=1)) / (n + m - 2)
    t = stats.t.ppf(0.975, n + m - 2)
    return float(t * math.sqrt(sp2 * (1.0 / n + 1.0 / m)))


def summarize_rows(rows) -> dict:
    """Per-method micro-averaged AUCs with 95% confidence intervals.

    The micro AUC pools the per-round values of all scenes and seeds.
    Intervals are Student-t over the per-seed micro AUCs. When both ours
    and single are present, their AUC difference is reported with the
    pooled two-sample half-width.
    """
    methods = sorted({r["method"] for r in rows})
    seeds = sorted({r["run_seed"] for r in rows})
    summary = {"methods": {}, "run_seeds": seeds,
               "scene_seeds": sorted({r["scene_seed"] for r in rows})}
    per_seed_auc = {}
    for m in methods:
        mrows = [r for r in rows if r["method"] == m]
        entry = {}
        for metric, key in (("explored_frac", "auc_explored"),
                            ("surface_cov", "auc_surface")):
            pooled = [r[metric] for r in mrows]
            by_seed = [auc([r[metric] for r in mrows if r["run_seed"] == s])
                       for s in seeds
                       if any(r["run_seed"] == s for r in mrows)]
            entry[key] = auc(pooled)
            entry[key + "_ci95"] = _t_half_width(by_seed)
            if metric == "explored_frac":
                per_seed_auc[m] = by_seed
        last_round = max(r["round"] for r in mrows)
        entry["final_unknown_cm3_mean"] = float(np.mean(
            [r["unknown_cm3"] for r in mrows if r["round"] == last_round]))
        entry["plan_time_s_total"] = float(np.sum(
            [r["plan_time_s"] for r in mrows]))
        summary["methods"][m] = entry
    if "ours" in per_seed_auc and "single" in per_seed_auc:
        a, b = per_seed_auc["ours"], per_seed_auc["single"]
        summary["ours_minus_single"] = {
            "auc_explored_diff": float(np.mean(a) - np.mean(b)),
            "pooled_ci95_half_width": _pooled_half_width(a, b),
        }
    if "ours" in per_seed_auc and "random" in per_seed_auc:
        a, b = per_seed_auc["ours"], per_seed_auc["random"]
        summary["ours_minus_random"] = {
            "auc_explored_diff": float(np.mean(a) - np.mean(b)),
            "pooled_ci95_half_width": _pooled_half_width(a, b),
        }
    return summary
