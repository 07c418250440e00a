"""Partition-matroid view selection over cached per-voxel gains.

The coordination utility of a view set is the per-cell maximum of the
selected views' cached gains, summed over cells. It is monotone and
submodular, so greedy selection of one view per sensor block carries the
half-optimal guarantee, which the exhaustive oracle here can verify on
small instances. Baselines: per-sensor naive argmax (no cross-sensor
term) and seeded uniform random choice.
"""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass, field

import numpy as np

from .scoring import ScoreModel, VisibilityCache, naive_view_score

EXHAUSTIVE_BUDGET = 10 ** 6


@dataclass
class ViewPartition:
    """Disjoint candidate-view blocks, one block per sensor."""

    blocks: list
    poses: dict | None = None

    def __post_init__(self):
        if not self.blocks:
            raise ValueError("partition needs at least one block")
        seen = set()
        for b, block in enumerate(self.blocks):
            if len(block) == 0:
                raise ValueError(f"block {b} is empty")
            ids = set(block)
            if len(ids) != len(block):
                raise ValueError(f"block {b} contains duplicate view ids")
            if ids & seen:
                raise ValueError("blocks must be pairwise disjoint")
            seen |= ids

    @property
    def n_blocks(self) -> int:
        return len(self.blocks)

    def all_ids(self) -> list:
        return [v for block in self.blocks for v in block]


@dataclass
class IndependentSet:
    """At most one view per block, in selection order."""

    selections: list  # (block_index, view_id) pairs

    def __post_init__(self):
        blocks = [b for b, _ in self.selections]
        if len(set(blocks)) != len(blocks):
            raise ValueError("independent set selects a block twice")

    def view_ids(self) -> list:
        return [v for _, v in self.selections]

    def by_block(self) -> dict:
        return {b: v for b, v in self.selections}

    def __len__(self):
        return len(self.selections)


@dataclass
class RunningBest:
    """Current best gain per cell across the selected views.

    Held dense over the grid for O(1) lookups; values only grow as views
    are added.
    """

    values: np.ndarray

    @staticmethod
    def zeros(n_cells: int) -> "RunningBest":
        return RunningBest(values=np.zeros(n_cells))

    def absorb(self, cache: VisibilityCache, view_id) -> None:
        idx, gains = cache.entries[view_id]
        self.values[idx] = np.maximum(self.values[idx], gains)


@dataclass
class PlanResult:
    chosen: IndependentSet
    utility: float
    marginals: list = field(default_factory=list)
    elapsed: float = 0.0


def _selected_ids(selection) -> list:
    if isinstance(selection, IndependentSet):
        return selection.view_ids()
    return list(selection)


def overlap_aware_utility(cache: VisibilityCache, selection) -> float:
    """Utility of a view set: per-cell max of cached gains, summed.

    Accepts an IndependentSet or any iterable of view ids (the function
    is well defined on arbitrary subsets). The empty set scores 0.
    """
    ids = _selected_ids(selection)
    if not ids:
        return 0.0
    for v in ids:
        if v not in cache.entries:
            raise ValueError(f"view {v!r} missing from the cache")
    scratch = np.zeros(cache.n_cells)
    parts = []
    for v in ids:
        idx, gains = cache.entries[v]
        scratch[idx] = np.maximum(scratch[idx], gains)
        parts.append(idx)
    union = np.unique(np.concatenate(parts)) if parts else np.empty(0, np.int64)
    return float(np.sum(scratch[union]))


def marginal_utility(cache: VisibilityCache, running: RunningBest, x) -> float:
    """Utility increase from adding view x on top of the running best."""
    if x not in cache.entries:
        raise ValueError(f"view {x!r} missing from the cache")
    idx, gains = cache.entries[x]
    if len(idx) == 0:
        return 0.0
    diff = gains - running.values[idx]
    return float(np.sum(np.maximum(diff, 0.0)))


def greedy_plan(partition: ViewPartition, cache: VisibilityCache) -> PlanResult:
    """Greedy selection of one view per block by maximum marginal utility.

    Each iteration scans every view of every unselected block and picks
    the largest marginal, breaking ties toward the lowest view id. The
    running per-cell best is then raised with the winner's gains.
    """
    t_start = time.perf_counter()
    running = RunningBest.zeros(cache.n_cells)
    open_blocks = set(range(partition.n_blocks))
    selections = []
    marginals = []
    while open_blocks:
        best_m = -1.0
        best_id = None
        best_block = None
        for b in sorted(open_blocks):
            for v in sorted(partition.blocks[b]):
                m = marginal_utility(cache, running, v)
                if m > best_m or (m == best_m and v < best_id):
                    best_m, best_id, best_block = m, v, b
        selections.append((best_block, best_id))
        marginals.append(best_m)
        running.absorb(cache, best_id)
        open_blocks.discard(best_block)
    chosen = IndependentSet(selections=selections)
    return PlanResult(chosen=chosen,
                      utility=overlap_aware_utility(cache, chosen),
                      marginals=marginals,
                      elapsed=time.perf_counter() - t_start)


def exhaustive_plan(partition: ViewPartition, cache: VisibilityCache,
                    budget: int = EXHAUSTIVE_BUDGET) -> PlanResult:
    """Optimal selection by full enumeration of the block product.

    Ties resolve to the lexicographically smallest id tuple (blocks in
    order, ids ascending). Refuses instances whose product exceeds the
    budget."""
    t_start = time.perf_counter()
    sizes = [len(b) for b in partition.blocks]
    n_combos = 1
    for s in sizes:
        n_combos *= s
    if n_combos > budget:
        raise ValueError(
            f"exhaustive enumeration of {n_combos} combinations exceeds "
            f"the budget of {budget}; raise the budget or shrink the blocks")

    all_ids = partition.all_ids()
    for v in all_ids:
        if v not in cache.entries:
            raise ValueError(f"view {v!r} missing from the cache")

    # dense per-view gain rows over the union of visible cells
    parts = [cache.entries[v][0] for v in all_ids]
    union = (np.unique(np.concatenate(parts)) if parts
             else np.empty(0, np.int64))
    rows = np.zeros((len(all_ids), len(union)))
    row_of = {}
    for r, v in enumerate(all_ids):
        idx, gains = cache.entries[v]
        rows[r, np.searchsorted(union, idx)] = gains
        row_of[v] = r

    combos = list(itertools.product(*[sorted(b) for b in partition.blocks]))
    best_val = -1.0
    best_combo = None
    chunk = 4096
    for lo in range(0, len(combos), chunk):
        batch = combos[lo:lo + chunk]
        sel = np.array([[row_of[v] for v in combo] for combo in batch])
        f = rows[sel, :].max(axis=1).sum(axis=1)
        w = int(np.argmax(f))
        if f[w] > best_val:
            best_val = float(f[w])
            best_combo = batch[w]
    chosen = IndependentSet(selections=list(enumerate(best_combo)))
    return PlanResult(chosen=chosen,
                      utility=overlap_aware_utility(cache, chosen),
                      marginals=[],
                      elapsed=time.perf_counter() - t_start)


def argmax_per_block(blocks, scores: dict) -> IndependentSet:
    """Independent per-block argmax of a score table, lowest id on ties."""
    selections = []
    for b, block in enumerate(blocks):
        best_id = None
        best_s = None
        for v in sorted(block):
            s = scores[v]
            if best_s is None or s > best_s:
                best_s, best_id = s, v
        selections.append((b, best_id))
    return IndependentSet(selections=selections)


def single_sensor_plan(partition: ViewPartition, traces_by_view: dict,
                       model: ScoreModel, map_grid) -> IndependentSet:
    """Per-sensor baseline: argmax of the literal per-ray score sum.

    Each block independently maximizes the sum of its view's ray scores,
    with no cross-sensor coordination and no per-cell deduplication."""
    scores = {v: naive_view_score(model, map_grid, traces_by_view[v])
              for v in partition.all_ids()}
    return argmax_per_block(partition.blocks, scores)


def random_plan(partition: ViewPartition, seed) -> IndependentSet:
    """Uniform independent choice per block from a seeded generator."""
    rng = seed if isinstance(seed, np.random.Generator) \
        else np.random.default_rng(seed)
    selections = []
    for b, block in enumerate(partition.blocks):
        ids = sorted(block)
        selections.append((b, ids[int(rng.integers(len(ids)))]))
    return IndependentSet(selections=selections)


def plan_result_to_dict(result: PlanResult, round_index: int, method: str,
                        poses: dict | None = None) -> dict:
    """JSON record of a plan: round, method, selections, utility, timings."""
    selections = []
    for b, v in result.chosen.selections:
        rec = {"sensor": b, "view_id": v}
        if poses and v in poses:
            pose = poses[v]
            rec["pose"] = {"position": pose.t.tolist(),
                           "rotation": pose.R.tolist()}
        selections.append(rec)
    return {"round": round_index, "method": method, "selections": selections,
            "utility": result.utility, "marginals": list(result.marginals),
            "elapsed_s": result.elapsed}
