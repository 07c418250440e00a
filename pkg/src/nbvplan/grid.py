"""Dense log-odds occupancy grid with Bayesian hit/miss updates.

The map is a uniform voxel grid. Each cell stores the log-odds
L = log(P / (1 - P)) of being occupied, plus a flag marking whether the
cell was ever touched by a measurement. Cells start at L = 0 (P = 0.5).
Hit and miss observations add fixed increments derived from the sensor
model probabilities, and the result is clamped to [-l_max, +l_max] so
probabilities stay inside the open interval (0, 1).

Log-odds arithmetic uses natural logs. Entropy is reported in bits.
Arrays are flat in x-fastest order: flat = i + nx * (j + ny * k).
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field

import numpy as np

GRID_MAGIC = b"NBVG"
GRID_VERSION = 1

# Above ~36 the float64 odds form exp(L)/(1+exp(L)) rounds to 1.0 and
# probabilities leave the open interval, so the clamp must stay below that.
L_MAX_LIMIT = 36.0


def logit(p: float) -> float:
    """Natural-log odds of a probability in (0, 1)."""
    if not 0.0 < p < 1.0:
        raise ValueError(f"probability must lie in (0, 1), got {p}")
    return math.log(p / (1.0 - p))


@dataclass(frozen=True)
class Box:
    """Axis-aligned box in meters, lo <= hi componentwise."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lo, dtype=float).reshape(3)
        hi = np.asarray(self.hi, dtype=float).reshape(3)
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise ValueError("box corners must be finite")
        if np.any(hi < lo):
            raise ValueError(f"box has hi < lo: lo={lo}, hi={hi}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def extent(self) -> np.ndarray:
        return self.hi - self.lo

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lo + self.hi)

    def volume(self) -> float:
        return float(np.prod(self.extent))

    def contains(self, points) -> np.ndarray:
        """Closed-box membership test for one point or an (n, 3) array."""
        p = np.asarray(points, dtype=float)
        inside = np.all((p >= self.lo) & (p <= self.hi), axis=-1)
        return inside

    def intersect(self, other: "Box") -> "Box | None":
        lo = np.maximum(self.lo, other.lo)
        hi = np.minimum(self.hi, other.hi)
        if np.any(hi < lo):
            return None
        return Box(lo, hi)

    def to_dict(self) -> dict:
        return {"min": self.lo.tolist(), "max": self.hi.tolist()}

    @staticmethod
    def from_dict(d: dict) -> "Box":
        return Box(np.asarray(d["min"], float), np.asarray(d["max"], float))


@dataclass(frozen=True)
class InverseSensorModel:
    """Hit/miss log-odds increments of a binary beam sensor."""

    p_hit: float = 0.9
    p_miss: float = 0.1
    l_max: float = 10.0

    def __post_init__(self):
        if not 0.5 < self.p_hit < 1.0:
            raise ValueError(f"p_hit must lie in (0.5, 1), got {self.p_hit}")
        if not 0.0 < self.p_miss < 0.5:
            raise ValueError(f"p_miss must lie in (0, 0.5), got {self.p_miss}")
        if not 0.0 < self.l_max <= L_MAX_LIMIT:
            raise ValueError(f"l_max must lie in (0, {L_MAX_LIMIT}], got {self.l_max}")

    @property
    def l_hit(self) -> float:
        return logit(self.p_hit)

    @property
    def l_miss(self) -> float:
        return logit(self.p_miss)


@dataclass
class VoxelGrid:
    """Dense voxel map storing per-cell log-odds and updated flags.

    origin is the world position of the minimum grid corner. Cell (i, j, k)
    covers the half-open box origin + [i, i+1) * resolution along x, and so
    on per axis. Flat storage order is x-fastest.
    """

    origin: np.ndarray
    resolution: float
    dims: tuple
    log_odds: np.ndarray
    updated: np.ndarray
    sensor: InverseSensorModel = field(default_factory=InverseSensorModel)

    def __post_init__(self):
        self.origin = np.asarray(self.origin, dtype=float).reshape(3)
        self.dims = tuple(int(d) for d in self.dims)
        if self.resolution <= 0:
            raise ValueError("resolution must be positive")
        if any(d < 1 for d in self.dims):
            raise ValueError(f"dims must be >= 1, got {self.dims}")
        n = self.n_cells
        if self.log_odds.shape != (n,) or self.updated.shape != (n,):
            raise ValueError("array lengths must equal the product of dims")

    @property
    def n_cells(self) -> int:
        nx, ny, nz = self.dims
        return nx * ny * nz

    @property
    def bounds(self) -> Box:
        return Box(self.origin, self.origin + np.asarray(self.dims) * self.resolution)

    def flat_index(self, ijk) -> np.ndarray:
        """Flat offset(s) of voxel index triples, x-fastest."""
        a = np.asarray(ijk, dtype=np.int64)
        nx, ny, _ = self.dims
        return a[..., 0] + nx * (a[..., 1] + ny * a[..., 2])

    def unflatten(self, flat) -> np.ndarray:
        f = np.asarray(flat, dtype=np.int64)
        nx, ny, _ = self.dims
        i = f % nx
        j = (f // nx) % ny
        k = f // (nx * ny)
        return np.stack([i, j, k], axis=-1)

    def in_bounds(self, ijk) -> np.ndarray:
        a = np.asarray(ijk, dtype=np.int64)
        return np.all((a >= 0) & (a < np.asarray(self.dims)), axis=-1)

    def voxel_center(self, ijk) -> np.ndarray:
        a = np.asarray(ijk, dtype=float)
        return self.origin + (a + 0.5) * self.resolution

    def world_to_index(self, points) -> np.ndarray:
        """Voxel index containing each point (half-open cells, no bounds check)."""
        p = np.asarray(points, dtype=float)
        return np.floor((p - self.origin) / self.resolution).astype(np.int64)

    def view3d(self, arr: np.ndarray) -> np.ndarray:
        """Reshape a flat per-cell array to [k, j, i] indexing without copying."""
        nx, ny, nz = self.dims
        return arr.reshape(nz, ny, nx)

    def copy(self) -> "VoxelGrid":
        return VoxelGrid(self.origin.copy(), self.resolution, self.dims,
                         self.log_odds.copy(), self.updated.copy(), self.sensor)

    def _check_index(self, v):
        a = np.asarray(v, dtype=np.int64).reshape(3)
        if not self.in_bounds(a):
            raise IndexError(f"voxel index {tuple(a)} outside dims {self.dims}")
        return a


def new_grid(bounds: Box, resolution: float,
             sensor: InverseSensorModel | None = None) -> VoxelGrid:
    """Uniform-prior grid covering the box at the given cell size.

    dims are ceil(extent / resolution) per axis, so the grid may extend
    slightly past the requested box. All cells start unknown (P = 0.5).
    """
    if resolution <= 0:
        raise ValueError(f"resolution must be positive, got {resolution}")
    extent = bounds.extent
    if np.any(extent <= 0):
        raise ValueError(f"bounds must have positive extent, got {extent}")
    dims = tuple(int(math.ceil(e / resolution)) for e in extent)
    n = dims[0] * dims[1] * dims[2]
    return VoxelGrid(
        origin=bounds.lo.copy(),
        resolution=float(resolution),
        dims=dims,
        log_odds=np.zeros(n, dtype=np.float64),
        updated=np.zeros(n, dtype=bool),
        sensor=sensor if sensor is not None else InverseSensorModel(),
    )


def occupancy(grid: VoxelGrid, v) -> float:
    """Occupancy probability of one voxel, strictly inside (0, 1)."""
    a = grid._check_index(v)
    return _occ_from_log_odds(grid.log_odds[grid.flat_index(a)])


def _occ_from_log_odds(lo):
    # The odds form exp(L)/(1+exp(L)) recovers p exactly for L = logit(p)
    # at common sensor probabilities, which 1/(1+exp(-L)) does not.
    odds = np.exp(lo)
    return odds / (1.0 + odds)


def occupancy_field(grid: VoxelGrid) -> np.ndarray:
    """Occupancy probabilities for all cells as a flat float64 array."""
    return _occ_from_log_odds(grid.log_odds)


def apply_observation(grid: VoxelGrid, v, z: str) -> None:
    """Integrate one hit or miss at a voxel (in place).

    Adds the sensor model's log-odds increment, clamps to [-l_max, +l_max],
    and marks the cell as updated.
    """
    a = grid._check_index(v)
    if z == "hit":
        inc = grid.sensor.l_hit
    elif z == "miss":
        inc = grid.sensor.l_miss
    else:
        raise ValueError(f"observation must be 'hit' or 'miss', got {z!r}")
    f = grid.flat_index(a)
    lm = grid.sensor.l_max
    grid.log_odds[f] = min(max(grid.log_odds[f] + inc, -lm), lm)
    grid.updated[f] = True


def entropy(grid: VoxelGrid, v) -> float:
    """Binary entropy of one voxel's occupancy, in bits."""
    p = occupancy(grid, v)
    return _binary_entropy(p)


def _binary_entropy(p):
    p = np.asarray(p, dtype=float)
    q = 1.0 - p
    with np.errstate(divide="ignore", invalid="ignore"):
        h = -(p * np.log2(p) + q * np.log2(q))
    h = np.where((p <= 0.0) | (p >= 1.0), 0.0, h)
    return float(h) if h.ndim == 0 else h


def entropy_field(grid: VoxelGrid) -> np.ndarray:
    """Per-cell binary entropy in bits as a flat float64 array."""
    return _binary_entropy(occupancy_field(grid))


def box_index_range(grid: VoxelGrid, box: Box):
    """Inclusive index ranges of cells whose centers fall in the closed box.

    Returns (lo, hi) int arrays of shape (3,), or None when no cell center
    lies inside the box.
    """
    rel_lo = (box.lo - grid.origin) / grid.resolution - 0.5
    rel_hi = (box.hi - grid.origin) / grid.resolution - 0.5
    lo = np.maximum(np.ceil(rel_lo), 0).astype(np.int64)
    hi = np.minimum(np.floor(rel_hi), np.asarray(grid.dims) - 1).astype(np.int64)
    if np.any(hi < lo):
        return None
    return lo, hi


def roi_mask(grid: VoxelGrid, roi: Box) -> np.ndarray:
    """Flat boolean mask of cells whose centers lie inside the closed box."""
    mask = np.zeros(grid.n_cells, dtype=bool)
    rng = box_index_range(grid, roi)
    if rng is None:
        return mask
    lo, hi = rng
    m3 = grid.view3d(mask)
    m3[lo[2]:hi[2] + 1, lo[1]:hi[1] + 1, lo[0]:hi[0] + 1] = True
    return mask


def explored_stats(grid: VoxelGrid, roi: Box) -> dict:
    """Updated-cell counts and volumes inside a region of interest.

    Volumes are reported in cm^3. A roi that misses the grid entirely
    yields zero counts.
    """
    rng = box_index_range(grid, roi)
    voxel_cm3 = (grid.resolution * 100.0) ** 3
    if rng is None:
        return {"updated_count": 0, "updated_volume_cm3": 0.0,
                "roi_voxel_count": 0, "unknown_count": 0,
                "unknown_volume_cm3": 0.0}
    lo, hi = rng
    u3 = grid.view3d(grid.updated)
    sub = u3[lo[2]:hi[2] + 1, lo[1]:hi[1] + 1, lo[0]:hi[0] + 1]
    updated_count = int(sub.sum())
    roi_count = int(sub.size)
    unknown = roi_count - updated_count
    return {
        "updated_count": updated_count,
        "updated_volume_cm3": updated_count * voxel_cm3,
        "roi_voxel_count": roi_count,
        "unknown_count": unknown,
        "unknown_volume_cm3": unknown * voxel_cm3,
    }


def save_grid(grid: VoxelGrid, path) -> None:
    """Write the binary grid dump.

    Layout: magic 'NBVG', version u32, dims 3 x u32, resolution f64,
    origin 3 x f64, then log-odds as little-endian f32 and the updated
    flags as packed bits. All integers little-endian.
    """
    header = struct.pack(
        "<4sI3Id3d", GRID_MAGIC, GRID_VERSION,
        grid.dims[0], grid.dims[1], grid.dims[2],
        grid.resolution, *grid.origin,
    )
    payload = grid.log_odds.astype("<f4").tobytes()
    flags = np.packbits(grid.updated.astype(np.uint8)).tobytes()
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload)
        fh.write(flags)


def load_grid(path, sensor: InverseSensorModel | None = None) -> VoxelGrid:
    """Read a binary grid dump written by save_grid.

    Log-odds come back as float64 upcast from the stored f32 payload, so a
    save/load/save round trip is byte-identical.
    """
    head_size = struct.calcsize("<4sI3Id3d")
    with open(path, "rb") as fh:
        head = fh.read(head_size)
        if len(head) < head_size:
            raise ValueError(f"truncated grid file: {path}")
        magic, version, nx, ny, nz, res, ox, oy, oz = struct.unpack("<4sI3Id3d", head)
        if magic != GRID_MAGIC:
            raise ValueError(f"bad magic {magic!r} in {path}")
        if version != GRID_VERSION:
            raise ValueError(f"unsupported grid version {version}")
        n = nx * ny * nz
        lo = np.frombuffer(fh.read(4 * n), dtype="<f4", count=n).astype(np.float64)
        nbytes = (n + 7) // 8
        bits = np.frombuffer(fh.read(nbytes), dtype=np.uint8, count=nbytes)
        updated = np.unpackbits(bits, count=n).astype(bool)
    return VoxelGrid(
        origin=np.array([ox, oy, oz]),
        resolution=res,
        dims=(nx, ny, nz),
        log_odds=lo,
        updated=updated,
        sensor=sensor if sensor is not None else InverseSensorModel(),
    )
