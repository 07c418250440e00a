"""Ray scores with pluggable weight and gain terms, plus per-view caches.

A ray score is the sum over traversed cells of weight * gain. Gains are
either the cell's occupancy entropy in bits or an unknown-cell indicator
(1 while the cell has never been measured). Weights are 1, the running
product of (1 - P) over the cells already crossed by the ray, or a
region-of-interest indicator.

For planning, each candidate view keeps its best weighted gain per
visible cell. Those per-view maxima are what the coordination utility
and its incremental marginals consume.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .grid import (Box, VoxelGrid, _binary_entropy, _occ_from_log_odds,
                   entropy_field, occupancy_field, roi_mask)
from .sensing import (RayTrace, lattice_coords, resolve_sampling,
                      view_ray_directions, DEFAULT_MAX_RANGE)

GAINS = ("entropy", "unknown_indicator")
WEIGHTS = ("unit", "occlusion_aware", "roi_masked")


@dataclass(frozen=True)
class ScoreModel:
    """Selects the gain and weight variant of the ray score."""

    gain: str = "entropy"
    weight: str = "unit"
    roi: object = None  # Box or flat boolean mask, required for roi_masked

    def __post_init__(self):
        if self.gain not in GAINS:
            raise ValueError(f"gain must be one of {GAINS}, got {self.gain!r}")
        if self.weight not in WEIGHTS:
            raise ValueError(f"weight must be one of {WEIGHTS}, got {self.weight!r}")
        if self.weight == "roi_masked" and self.roi is None:
            raise ValueError("roi_masked weight requires a roi")


@dataclass
class PerVoxelGain:
    """Weighted gain addends of one ray, in traversal order."""

    cells: np.ndarray
    gains: np.ndarray

    def __post_init__(self):
        if np.any(self.gains < 0) or not np.all(np.isfinite(self.gains)):
            raise ValueError("gains must be finite and non-negative")


@dataclass
class VisibilityCache:
    """Best weighted gain per visible cell, for each candidate view.

    entries maps a view id to (flat cell ids ascending, gains), and totals
    holds the summed gains, the utility of the view taken alone.
    """

    dims: tuple
    entries: dict
    totals: dict

    @property
    def n_cells(self) -> int:
        nx, ny, nz = self.dims
        return nx * ny * nz

    def view_ids(self):
        return self.entries.keys()


def _roi_flat_mask(model: ScoreModel, grid: VoxelGrid) -> np.ndarray:
    if isinstance(model.roi, Box):
        mask = roi_mask(grid, model.roi)
    else:
        mask = np.asarray(model.roi, dtype=bool).reshape(-1)
        if mask.shape != (grid.n_cells,):
            raise ValueError("roi mask length must equal the cell count")
    if not mask.any():
        raise ValueError("roi_masked weight requires a non-empty roi")
    return mask


def gain_field(model: ScoreModel, grid: VoxelGrid) -> np.ndarray:
    """Per-cell gain c(v) over the whole grid, flat float64."""
    if model.gain == "entropy":
        return entropy_field(grid)
    return (~grid.updated).astype(np.float64)


def per_voxel_gains(model: ScoreModel, map_grid: VoxelGrid,
                    ray: RayTrace) -> PerVoxelGain:
    """Weighted gain addends for one trace.

    Entry j carries w_j * c(v_j), where w_j is 1 for the first cell and,
    for occlusion-aware weights, the product of (1 - P) over the cells
    before j on the same ray.
    """
    k = len(ray)
    if k == 0:
        return PerVoxelGain(cells=ray.cells, gains=np.empty(0))
    flat = map_grid.flat_index(ray.cells)
    if model.gain == "entropy":
        c = _binary_entropy(_occ_from_log_odds(map_grid.log_odds[flat]))
    else:
        c = (~map_grid.updated[flat]).astype(np.float64)
    if model.weight == "unit":
        w = np.ones(k)
    elif model.weight == "occlusion_aware":
        p = _occ_from_log_odds(map_grid.log_odds[flat])
        w = np.empty(k)
        w[0] = 1.0
        if k > 1:
            w[1:] = np.cumprod(1.0 - p[:-1])
    else:
        mask = _roi_flat_mask(model, map_grid)
        w = mask[flat].astype(np.float64)
    return PerVoxelGain(cells=ray.cells, gains=w * c)


def ray_score(model: ScoreModel, map_grid: VoxelGrid, ray: RayTrace) -> float:
    """Sum of the weighted gains along one ray."""
    return float(np.sum(per_voxel_gains(model, map_grid, ray).gains))


def naive_view_score(model: ScoreModel, map_grid: VoxelGrid, traces) -> float:
    """Literal per-ray score sum of a view.

    Cells crossed by several rays of the same view are counted once per
    ray here, unlike the cache's per-cell max.
    """
    total = 0.0
    for ray in traces:
        total += ray_score(model, map_grid, ray)
    return total


def build_cache(map_grid: VoxelGrid, traces_by_view: dict,
                model: ScoreModel) -> VisibilityCache:
    """Best weighted gain per cell for each view, from explicit traces.

    For each view x and visible cell v the cache keeps the maximum over
    the view's rays of the weighted gain at v, plus the per-view total.
    """
    entries = {}
    totals = {}
    for view_id, traces in traces_by_view.items():
        flats = []
        gains = []
        for ray in traces:
            if len(ray) == 0:
                continue
            pv = per_voxel_gains(model, map_grid, ray)
            flats.append(map_grid.flat_index(ray.cells))
            gains.append(pv.gains)
        if not flats:
            entries[view_id] = (np.empty(0, dtype=np.int64), np.empty(0))
            totals[view_id] = 0.0
            continue
        flat = np.concatenate(flats)
        g = np.concatenate(gains)
        uniq, inverse = np.unique(flat, return_inverse=True)
        best = np.zeros(len(uniq))
        np.maximum.at(best, inverse, g)
        entries[view_id] = (uniq, best)
        totals[view_id] = float(np.sum(best))
    return VisibilityCache(dims=map_grid.dims, entries=entries, totals=totals)


def score_views_fast(map_grid: VoxelGrid, poses: dict, intr,
                     model: ScoreModel, sampling=0.1,
                     max_range: float = DEFAULT_MAX_RANGE):
    """Kernel-backed equivalent of cast_view + build_cache for many views.

    Returns (VisibilityCache, naive totals dict). Gains pass through
    float32 scratch, so totals match the pure path to float32 precision
    rather than exactly.
    """
    stride = resolve_sampling(intr, sampling)
    xs, ys = lattice_coords(intr, stride)
    nx, ny, nz = map_grid.dims
    n = map_grid.n_cells

    g64 = gain_field(model, map_grid)
    if model.weight == "roi_masked":
        g64 = g64 * _roi_flat_mask(model, map_grid)
    g32 = g64.astype(np.float32)
    occupied = map_grid.log_odds > 0.0
    cell_score = np.where(occupied, np.float32(-1.0) - g32, g32)
    if model.weight == "occlusion_aware":
        occ_prob = occupancy_field(map_grid).astype(np.float32)

    stamp = np.zeros(n, dtype=np.int32)
    best = np.zeros(n, dtype=np.float32)
    touched = np.zeros(n, dtype=np.int64)

    entries = {}
    totals = {}
    naive = {}
    stamp_val = 0
    for view_id, pose in poses.items():
        stamp_val += 1
        dirs = view_ray_directions(pose, intr, xs, ys)
        args = (nx, ny, nz,
                map_grid.origin[0], map_grid.origin[1], map_grid.origin[2],
                map_grid.resolution, pose.t[0], pose.t[1], pose.t[2],
                dirs, float(max_range), stamp, stamp_val, best, touched)
        if model.weight == "occlusion_aware":
            cnt, total = _kernels.score_view_occlusion(cell_score, occ_prob, *args)
        else:
            cnt, total = _kernels.score_view_unit(cell_score, *args)
        idx = np.sort(touched[:cnt])
        gains = best[idx].astype(np.float64)
        entries[view_id] = (idx, gains)
        totals[view_id] = float(np.sum(gains))
        naive[view_id] = float(total)
    return VisibilityCache(dims=map_grid.dims, entries=entries, totals=totals), naive
