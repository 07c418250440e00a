"""Pinhole depth-camera geometry and incremental ray-voxel traversal.

Rays are cast with a parametric grid walk that visits every pierced cell
exactly once. Cells own the half-open box [lo, lo + resolution) per axis,
so a point lying exactly on a shared boundary belongs to the cell after
the boundary along that axis. When the parametric distance to the next
boundary ties across axes, all tying axes step at once, which makes the
walk deterministic and lets consecutive cells be edge or corner adjacent.

A ray that ends exactly on a cell boundary still enters the boundary
cell: the walk stops only when the next crossing lies strictly past the
ray length. That keeps rendered depths (distance to the entry face of a
hit cell) consistent with map updates, where the hit cell must be the
terminal cell of the traversal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .grid import VoxelGrid

DEFAULT_MAX_RANGE = 10.0
NO_RETURN = np.inf


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole model: focal lengths and principal point in pixels."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")
        if self.width < 1 or self.height < 1:
            raise ValueError("image size must be positive")


def default_intrinsics(width: int = 320, height: int = 240,
                       hfov_deg: float = 60.0) -> CameraIntrinsics:
    """Intrinsics from a horizontal field of view, square pixels.

    The default is a 60 degree HFOV at 320x240, giving fx = fy = 277.128
    and the principal point at the image center.
    """
    f = (width / 2.0) / math.tan(math.radians(hfov_deg) / 2.0)
    return CameraIntrinsics(fx=f, fy=f, cx=(width - 1) / 2.0,
                            cy=(height - 1) / 2.0, width=width, height=height)


@dataclass(frozen=True)
class ViewPose:
    """Camera pose: translation plus camera-to-world rotation.

    Camera frame convention: +x image right, +y image down, +z optical
    axis. Columns of the rotation are the camera axes in world frame.
    """

    t: np.ndarray
    R: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float).reshape(3)
        R = np.asarray(self.R, dtype=float).reshape(3, 3)
        if np.max(np.abs(R.T @ R - np.eye(3))) > 1e-9:
            raise ValueError("rotation must be orthonormal to 1e-9")
        if np.linalg.det(R) < 0.0:
            raise ValueError("rotation must have determinant +1")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "R", R)

    @property
    def forward(self) -> np.ndarray:
        return self.R[:, 2]


def look_at(eye, target, up=(0.0, 0.0, 1.0)) -> ViewPose:
    """Pose at eye with the optical axis through target, image y downward."""
    eye = np.asarray(eye, dtype=float).reshape(3)
    target = np.asarray(target, dtype=float).reshape(3)
    z = target - eye
    nz = np.linalg.norm(z)
    if nz < 1e-12:
        raise ValueError("eye and target coincide")
    z = z / nz
    x = np.cross(z, np.asarray(up, dtype=float))
    nx = np.linalg.norm(x)
    if nx < 1e-9:
        # looking along up, fall back to an arbitrary horizontal axis
        x = np.cross(z, np.array([0.0, 1.0, 0.0]))
        nx = np.linalg.norm(x)
    x = x / nx
    y = np.cross(z, x)
    return ViewPose(t=eye, R=np.column_stack([x, y, z]))


@dataclass
class RayTrace:
    """Ordered cells pierced by one ray plus the termination cause.

    terminal is one of 'hit_surface', 'max_range', 'left_grid'. length is
    the parametric distance traversed from the ray origin, which for a
    surface hit equals the entry-face distance of the terminal cell.
    entry_t holds the per-cell entry distances in the same order as cells.
    """

    cells: np.ndarray
    terminal: str
    length: float
    entry_t: np.ndarray

    def __len__(self):
        return len(self.cells)


@dataclass
class DepthImage:
    """Depths in meters on a regular pixel lattice of a full sensor frame.

    depths[r, c] is the depth at pixel (x0 + c*sx, y0 + r*sy). Infinity
    marks a no-return pixel. A full-resolution image has x0 = y0 = 0 and
    sx = sy = 1.
    """

    width: int
    height: int
    x0: int
    y0: int
    sx: int
    sy: int
    depths: np.ndarray

    def __post_init__(self):
        rows, cols = self.depths.shape
        if cols < 1 or rows < 1:
            raise ValueError("depth image is empty")
        if self.x0 + (cols - 1) * self.sx >= self.width:
            raise ValueError("pixel lattice exceeds image width")
        if self.y0 + (rows - 1) * self.sy >= self.height:
            raise ValueError("pixel lattice exceeds image height")

    @property
    def pixel_xs(self) -> np.ndarray:
        return self.x0 + self.sx * np.arange(self.depths.shape[1])

    @property
    def pixel_ys(self) -> np.ndarray:
        return self.y0 + self.sy * np.arange(self.depths.shape[0])


def pixel_ray_direction(intr: CameraIntrinsics, x, y) -> np.ndarray:
    """Unit ray direction in the camera frame for a pixel coordinate."""
    if not (0 <= x < intr.width and 0 <= y < intr.height):
        raise ValueError(f"pixel ({x}, {y}) outside {intr.width}x{intr.height}")
    d = np.array([(x - intr.cx) / intr.fx, (y - intr.cy) / intr.fy, 1.0])
    return d / np.linalg.norm(d)


def direction_to_pixel(intr: CameraIntrinsics, d) -> tuple:
    """Invert pixel_ray_direction (any scale of a forward direction)."""
    d = np.asarray(d, dtype=float).reshape(3)
    if d[2] <= 0:
        raise ValueError("direction must point forward (positive z)")
    return (intr.cx + intr.fx * d[0] / d[2], intr.cy + intr.fy * d[1] / d[2])


def stride_for_fraction(fraction: float) -> tuple:
    """Square pixel stride whose lattice density best matches a fraction.

    Picks the integer s >= 1 minimizing |1/s^2 - fraction| (smaller s on
    ties), so 0.1 rays per pixel maps to stride (3, 3).
    """
    if not 0.0 < fraction <= 1.0:
        raise ValueError(f"fraction must lie in (0, 1], got {fraction}")
    s_hi = int(math.ceil(2.0 / math.sqrt(fraction))) + 1
    best, best_err = 1, abs(1.0 - fraction)
    for s in range(2, s_hi + 1):
        err = abs(1.0 / (s * s) - fraction)
        if err < best_err:
            best, best_err = s, err
    return (best, best)


def lattice_coords(intr: CameraIntrinsics, stride) -> tuple:
    """Sampled pixel columns and rows for a stride: offset s//2, count n//s."""
    sx, sy = stride
    if sx < 1 or sy < 1:
        raise ValueError("stride components must be >= 1")
    ncols = intr.width // sx
    nrows = intr.height // sy
    if ncols < 1 or nrows < 1:
        raise ValueError(f"stride {stride} leaves no pixels in "
                         f"{intr.width}x{intr.height}")
    xs = sx // 2 + sx * np.arange(ncols)
    ys = sy // 2 + sy * np.arange(nrows)
    return xs, ys


def resolve_sampling(intr: CameraIntrinsics, sampling) -> tuple:
    """Normalize a sampling spec (None, fraction, or stride pair) to strides."""
    if sampling is None:
        return (1, 1)
    if isinstance(sampling, (int, float)) and not isinstance(sampling, bool):
        return stride_for_fraction(float(sampling))
    sx, sy = sampling
    return (int(sx), int(sy))


def view_ray_directions(pose: ViewPose, intr: CameraIntrinsics,
                        xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """World-frame unit directions for a pixel lattice, y-major order."""
    dx = (xs - intr.cx) / intr.fx
    dy = (ys - intr.cy) / intr.fy
    gx, gy = np.meshgrid(dx, dy)
    dirs = np.stack([gx, gy, np.ones_like(gx)], axis=-1).reshape(-1, 3)
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    return np.ascontiguousarray(dirs @ pose.R.T)


def traverse(grid: VoxelGrid, origin, direction, max_len: float) -> RayTrace:
    """Walk the segment origin + t*direction, t in [0, max_len], cell by cell.

    Returns every pierced cell in order. A ray starting outside the grid is
    advanced to its entry point first; one that never intersects the grid
    yields an empty trace with terminal 'left_grid'. The terminal cause is
    'max_range' when the segment ends inside a cell and 'left_grid' when
    the walk steps outside the grid.
    """
    o = np.asarray(origin, dtype=float).reshape(3)
    d = np.asarray(direction, dtype=float).reshape(3)
    if abs(np.linalg.norm(d) - 1.0) > 1e-6:
        raise ValueError("direction must be unit length")
    if max_len <= 0:
        raise ValueError("max_len must be positive")

    gmin = grid.origin
    res = grid.resolution
    dims = np.asarray(grid.dims)

    empty = RayTrace(cells=np.empty((0, 3), dtype=np.int64), terminal="left_grid",
                     length=0.0, entry_t=np.empty(0))

    # clip the segment to the grid box
    t0, t1 = 0.0, max_len
    for a in range(3):
        lo = gmin[a]
        hi = gmin[a] + dims[a] * res
        if d[a] != 0.0:
            ta = (lo - o[a]) / d[a]
            tb = (hi - o[a]) / d[a]
            if ta > tb:
                ta, tb = tb, ta
            if ta > t0:
                t0 = ta
            if tb < t1:
                t1 = tb
        elif o[a] < lo or o[a] >= hi:
            return empty
    if t0 > t1:
        return empty

    # start cell via floor, with directional ownership at exact boundaries
    p = o + t0 * d
    idx = np.floor((p - gmin) / res).astype(np.int64)
    for a in range(3):
        if idx[a] < 0:
            if d[a] > 0:
                idx[a] = 0
            else:
                return empty
        elif idx[a] >= dims[a]:
            if d[a] < 0:
                idx[a] = dims[a] - 1
            else:
                return empty

    step = np.where(d > 0, 1, np.where(d < 0, -1, 0))
    tmax = np.empty(3)
    tdelta = np.empty(3)
    for a in range(3):
        if d[a] > 0:
            tmax[a] = (gmin[a] + (idx[a] + 1) * res - o[a]) / d[a]
            tdelta[a] = res / d[a]
        elif d[a] < 0:
            tmax[a] = (gmin[a] + idx[a] * res - o[a]) / d[a]
            tdelta[a] = -res / d[a]
        else:
            tmax[a] = np.inf
            tdelta[a] = np.inf

    cells = [idx.copy()]
    entry = [t0]
    while True:
        tn = tmax.min()
        if tn > max_len:
            terminal, t_end = "max_range", max_len
            break
        hit_axes = tmax == tn
        idx[hit_axes] += step[hit_axes]
        tmax[hit_axes] += tdelta[hit_axes]
        if np.any(idx < 0) or np.any(idx >= dims):
            terminal, t_end = "left_grid", tn
            break
        cells.append(idx.copy())
        entry.append(tn)

    return RayTrace(cells=np.array(cells, dtype=np.int64),
                    terminal=terminal, length=float(t_end),
                    entry_t=np.array(entry, dtype=float))


def _truncate_at_occupied(grid: VoxelGrid, trace: RayTrace,
                          occupied_flat: np.ndarray) -> RayTrace:
    """Cut a trace at the first occupied cell entered at t > 0."""
    if len(trace) == 0:
        return trace
    flat = grid.flat_index(trace.cells)
    blocking = occupied_flat[flat] & (trace.entry_t > 0.0)
    where = np.flatnonzero(blocking)
    if where.size == 0:
        return trace
    m = int(where[0])
    return RayTrace(cells=trace.cells[:m + 1], terminal="hit_surface",
                    length=float(trace.entry_t[m]), entry_t=trace.entry_t[:m + 1])


def cast_view(map_grid: VoxelGrid, pose: ViewPose, intr: CameraIntrinsics,
              sampling=0.1, max_range: float = DEFAULT_MAX_RANGE) -> list:
    """Planning-time raytrace of a candidate view against the belief map.

    One trace per sampled pixel, y-major. Traces pass through unknown
    cells (P = 0.5) and stop at the first cell believed occupied
    (occupancy strictly above 0.5), which is kept as the terminal cell.
    The cell containing the camera itself never terminates a trace.
    """
    stride = resolve_sampling(intr, sampling)
    xs, ys = lattice_coords(intr, stride)
    dirs = view_ray_directions(pose, intr, xs, ys)
    occupied = map_grid.log_odds > 0.0
    traces = []
    for d_world in dirs:
        trace = traverse(map_grid, pose.t, d_world, max_range)
        traces.append(_truncate_at_occupied(map_grid, trace, occupied))
    return traces


def _require_binary(gt: VoxelGrid) -> np.ndarray:
    lm = gt.sensor.l_max
    if not np.all(np.abs(gt.log_odds) == lm):
        raise ValueError("ground-truth grid must be saturated at +/- l_max")
    return gt.log_odds > 0.0


def render_depth(ground_truth: VoxelGrid, pose: ViewPose, intr: CameraIntrinsics,
                 max_range: float = DEFAULT_MAX_RANGE, sampling=None) -> DepthImage:
    """Render depths against a binary grid: entry-face distance of the
    first occupied cell along each pixel ray, infinity when none is hit
    within range."""
    occupied = _require_binary(ground_truth)
    stride = resolve_sampling(intr, sampling)
    xs, ys = lattice_coords(intr, stride)
    dirs = view_ray_directions(pose, intr, xs, ys)
    depth = np.empty(len(dirs))
    nx, ny, nz = ground_truth.dims
    _kernels.render_rays(
        occupied, nx, ny, nz,
        ground_truth.origin[0], ground_truth.origin[1], ground_truth.origin[2],
        ground_truth.resolution,
        pose.t[0], pose.t[1], pose.t[2], dirs, float(max_range), depth)
    return DepthImage(width=intr.width, height=intr.height,
                      x0=int(xs[0]), y0=int(ys[0]), sx=stride[0], sy=stride[1],
                      depths=depth.reshape(len(ys), len(xs)))


def update_from_depth(map_grid: VoxelGrid, pose: ViewPose, intr: CameraIntrinsics,
                      img: DepthImage, max_range: float = DEFAULT_MAX_RANGE) -> None:
    """Integrate a depth image into the map (in place).

    Every traversed cell before the terminal cell receives a miss, the
    cell whose entry face matches the measured depth receives the hit,
    and no-return pixels integrate misses out to max_range. Each ray
    updates its cells independently, with no per-image deduplication.
    """
    if (img.width, img.height) != (intr.width, intr.height):
        raise ValueError("depth image size does not match the intrinsics")
    dirs = view_ray_directions(pose, intr, img.pixel_xs, img.pixel_ys)
    sensor = map_grid.sensor
    nx, ny, nz = map_grid.dims
    _kernels.integrate_rays(
        map_grid.log_odds, map_grid.updated, nx, ny, nz,
        map_grid.origin[0], map_grid.origin[1], map_grid.origin[2],
        map_grid.resolution,
        pose.t[0], pose.t[1], pose.t[2], dirs,
        np.ascontiguousarray(img.depths, dtype=np.float64).ravel(),
        float(max_range), sensor.l_hit, sensor.l_miss, sensor.l_max)


def observe_view(map_grid: VoxelGrid, ground_truth: VoxelGrid, pose: ViewPose,
                 intr: CameraIntrinsics, sampling=0.1,
                 max_range: float = DEFAULT_MAX_RANGE) -> DepthImage:
    """Render a depth image from the ground truth and integrate it into
    the map, using one shared ray lattice. Returns the rendered image."""
    if map_grid.dims != ground_truth.dims or \
            map_grid.resolution != ground_truth.resolution or \
            not np.array_equal(map_grid.origin, ground_truth.origin):
        raise ValueError("map and ground truth must share geometry")
    img = render_depth(ground_truth, pose, intr, max_range, sampling)
    update_from_depth(map_grid, pose, intr, img, max_range)
    return img


def save_depth_pgm(img: DepthImage, path) -> None:
    """Write a PGM-style 16-bit little-endian depth image in millimeters.

    Zero encodes no-return. The sensor size and pixel lattice are kept in
    a comment line so the image round-trips.
    """
    mm = np.where(np.isfinite(img.depths), np.rint(img.depths * 1000.0), 0.0)
    mm = np.clip(mm, 0, 65535).astype("<u2")
    rows, cols = img.depths.shape
    header = (f"P5\n# lattice {img.width} {img.height} {img.x0} {img.y0} "
              f"{img.sx} {img.sy}\n{cols} {rows}\n65535\n")
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(mm.tobytes())


def load_depth_pgm(path) -> DepthImage:
    """Read a depth image written by save_depth_pgm."""
    with open(path, "rb") as fh:
        data = fh.read()
    if not data.startswith(b"P5"):
        raise ValueError(f"not a P5 PGM file: {path}")
    pos = 2
    tokens = []
    lattice = None
    while len(tokens) < 3:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            end = data.index(b"\n", pos)
            comment = data[pos + 1:end].split()
            if comment and comment[0] == b"lattice":
                lattice = [int(v) for v in comment[1:7]]
            pos = end + 1
            continue
        end = pos
        while end < len(data) and not data[end:end + 1].isspace():
            end += 1
        tokens.append(int(data[pos:end]))
        pos = end
    pos += 1  # single whitespace after maxval
    cols, rows, maxval = tokens
    if maxval != 65535:
        raise ValueError("expected a 16-bit PGM")
    mm = np.frombuffer(data, dtype="<u2", count=cols * rows, offset=pos)
    depths = mm.reshape(rows, cols).astype(float) / 1000.0
    depths[depths == 0.0] = NO_RETURN
    if lattice is None:
        lattice = [cols, rows, 0, 0, 1, 1]
    w, h, x0, y0, sx, sy = lattice
    return DepthImage(width=w, height=h, x0=x0, y0=y0, sx=sx, sy=sy,
                      depths=depths)
