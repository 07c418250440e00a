"""Numba fast paths for rendering, map integration, and view scoring.

Every kernel walks rays with the same parametric grid stepping as
sensing.traverse, with identical expression order, so cells and entry
distances agree bitwise with the pure reference. The per-cell action is
the only thing that differs between kernels. Keep the setup and stepping
blocks in sync when editing.

Flat cell order is x-fastest: flat = i + nx * (j + ny * k).
"""

import numpy as np
from numba import njit


@njit(cache=True)
def _ray_setup(ox, oy, oz, dx, dy, dz, gx, gy, gz, res, nx, ny, nz, max_len):
    """Clip a ray to the grid and compute DDA state.

    Returns (ok, t0, i, j, k, si, sj, sk, tmx, tmy, tmz, tdx, tdy, tdz).
    ok is False when the segment misses the grid.
    """
    inf = np.inf
    t0 = 0.0
    t1 = max_len
    hx = gx + nx * res
    hy = gy + ny * res
    hz = gz + nz * res

    if dx != 0.0:
        ta = (gx - ox) / dx
        tb = (hx - ox) / dx
        if ta > tb:
            ta, tb = tb, ta
        if ta > t0:
            t0 = ta
        if tb < t1:
            t1 = tb
    elif ox < gx or ox >= hx:
        return False, 0.0, 0, 0, 0, 0, 0, 0, inf, inf, inf, inf, inf, inf
    if dy != 0.0:
        ta = (gy - oy) / dy
        tb = (hy - oy) / dy
        if ta > tb:
            ta, tb = tb, ta
        if ta > t0:
            t0 = ta
        if tb < t1:
            t1 = tb
    elif oy < gy or oy >= hy:
        return False, 0.0, 0, 0, 0, 0, 0, 0, inf, inf, inf, inf, inf, inf
    if dz != 0.0:
        ta = (gz - oz) / dz
        tb = (hz - oz) / dz
        if ta > tb:
            ta, tb = tb, ta
        if ta > t0:
            t0 = ta
        if tb < t1:
            t1 = tb
    elif oz < gz or oz >= hz:
        return False, 0.0, 0, 0, 0, 0, 0, 0, inf, inf, inf, inf, inf, inf
    if t0 > t1:
        return False, 0.0, 0, 0, 0, 0, 0, 0, inf, inf, inf, inf, inf, inf

    px = ox + t0 * dx
    py = oy + t0 * dy
    pz = oz + t0 * dz
    i = int(np.floor((px - gx) / res))
    j = int(np.floor((py - gy) / res))
    k = int(np.floor((pz - gz) / res))

    # directional ownership when the entry point sits exactly on a face
    if i < 0:
        if dx > 0:
            i = 0
        else:
            return False, 0.0, 0, 0, 0, 0, 0, 0, inf, inf, inf, inf, inf, inf
    elif i >= nx:
        if dx < 0:
            i = nx - 1
        else:
            return False, 0.0, 0, 0, 0, 0, 0, 0, inf, inf, inf, inf, inf, inf
    if j < 0:
        if dy > 0:
            j = 0
        else:
            return False, 0.0, 0, 0, 0, 0, 0, 0, inf, inf, inf, inf, inf, inf
    elif j >= ny:
        if dy < 0:
            j = ny - 1
        else:
            return False, 0.0, 0, 0, 0, 0, 0, 0, inf, inf, inf, inf, inf, inf
    if k < 0:
        if dz > 0:
            k = 0
        else:
            return False, 0.0, 0, 0, 0, 0, 0, 0, inf, inf, inf, inf, inf, inf
    elif k >= nz:
        if dz < 0:
            k = nz - 1
        else:
            return False, 0.0, 0, 0, 0, 0, 0, 0, inf, inf, inf, inf, inf, inf

    if dx > 0:
        si = 1
        tmx = (gx + (i + 1) * res - ox) / dx
        tdx = res / dx
    elif dx < 0:
        si = -1
        tmx = (gx + i * res - ox) / dx
        tdx = -res / dx
    else:
        si = 0
        tmx = inf
        tdx = inf
    if dy > 0:
        sj = 1
        tmy = (gy + (j + 1) * res - oy) / dy
        tdy = res / dy
    elif dy < 0:
        sj = -1
        tmy = (gy + j * res - oy) / dy
        tdy = -res / dy
    else:
        sj = 0
        tmy = inf
        tdy = inf
    if dz > 0:
        sk = 1
        tmz = (gz + (k + 1) * res - oz) / dz
        tdz = res / dz
    elif dz < 0:
        sk = -1
        tmz = (gz + k * res - oz) / dz
        tdz = -res / dz
    else:
        sk = 0
        tmz = inf
        tdz = inf

    return True, t0, i, j, k, si, sj, sk, tmx, tmy, tmz, tdx, tdy, tdz


@njit(cache=True)
def render_rays(occupied, nx, ny, nz, gx, gy, gz, res,
                ox, oy, oz, dirs, max_len, out_depth):
    """Depth per ray: entry distance of the first occupied cell reached at
    t > 0, infinity when none is hit within max_len."""
    n_rays = dirs.shape[0]
    for r in range(n_rays):
        dx = dirs[r, 0]
        dy = dirs[r, 1]
        dz = dirs[r, 2]
        out_depth[r] = np.inf
        ok, t, i, j, k, si, sj, sk, tmx, tmy, tmz, tdx, tdy, tdz = _ray_setup(
            ox, oy, oz, dx, dy, dz, gx, gy, gz, res, nx, ny, nz, max_len)
        if not ok:
            continue
        while True:
            idx = i + nx * (j + ny * k)
            if occupied[idx] and t > 0.0:
                out_depth[r] = t
                break
            tn = tmx
            if tmy < tn:
                tn = tmy
            if tmz < tn:
                tn = tmz
            if tn > max_len:
                break
            if tmx == tn:
                i += si
                tmx += tdx
            if tmy == tn:
                j += sj
                tmy += tdy
            if tmz == tn:
                k += sk
                tmz += tdz
            if i < 0 or i >= nx or j < 0 or j >= ny or k < 0 or k >= nz:
                break
            t = tn


@njit(cache=True)
def integrate_rays(log_odds, updated, nx, ny, nz, gx, gy, gz, res,
                   ox, oy, oz, dirs, depths, max_len, l_hit, l_miss, l_max):
    """Apply per-ray hit/miss updates for measured depths.

    Cells entered before the measured depth receive misses, the cell whose
    entry distance reaches the depth receives the hit and ends the ray.
    Infinite depths integrate misses to max_len."""
    n_rays = dirs.shape[0]
    for r in range(n_rays):
        dx = dirs[r, 0]
        dy = dirs[r, 1]
        dz = dirs[r, 2]
        depth = depths[r]
        ok, t, i, j, k, si, sj, sk, tmx, tmy, tmz, tdx, tdy, tdz = _ray_setup(
            ox, oy, oz, dx, dy, dz, gx, gy, gz, res, nx, ny, nz, max_len)
        if not ok:
            continue
        while True:
            idx = i + nx * (j + ny * k)
            if t >= depth:
                lo = log_odds[idx] + l_hit
                if lo > l_max:
                    lo = l_max
                log_odds[idx] = lo
                updated[idx] = True
                break
            lo = log_odds[idx] + l_miss
            if lo < -l_max:
                lo = -l_max
            log_odds[idx] = lo
            updated[idx] = True
            tn = tmx
            if tmy < tn:
                tn = tmy
            if tmz < tn:
                tn = tmz
            if tn > max_len:
                break
            if tmx == tn:
                i += si
                tmx += tdx
            if tmy == tn:
                j += sj
                tmy += tdy
            if tmz == tn:
                k += sk
                tmz += tdz
            if i < 0 or i >= nx or j < 0 or j >= ny or k < 0 or k >= nz:
                break
            t = tn


@njit(cache=True)
def score_view_unit(cell_score, nx, ny, nz, gx, gy, gz, res,
                    ox, oy, oz, dirs, max_len, stamp, stamp_val,
                    best, touched):
    """Score one view's rays under unit weights.

    cell_score encodes, per cell, the gain for free cells (>= 0) and
    -1 - gain for cells believed occupied (< 0), which terminate rays
    when entered at t > 0. Accumulates the naive per-ray score sum and
    scatter-maxes per-cell gains into best[], tracking first-touch cells
    of this stamp generation in touched[]. Returns (touch count, naive sum).
    """
    n_rays = dirs.shape[0]
    n_touched = 0
    naive = 0.0
    for r in range(n_rays):
        dx = dirs[r, 0]
        dy = dirs[r, 1]
        dz = dirs[r, 2]
        ok, t, i, j, k, si, sj, sk, tmx, tmy, tmz, tdx, tdy, tdz = _ray_setup(
            ox, oy, oz, dx, dy, dz, gx, gy, gz, res, nx, ny, nz, max_len)
        if not ok:
            continue
        while True:
            idx = i + nx * (j + ny * k)
            v = cell_score[idx]
            blocked = v < 0.0 and t > 0.0
            if v < 0.0:
                g = np.float32(-1.0) - v
            else:
                g = v
            naive += g
            if stamp[idx] != stamp_val:
                stamp[idx] = stamp_val
                touched[n_touched] = idx
                n_touched += 1
                best[idx] = g
            elif g > best[idx]:
                best[idx] = g
            if blocked:
                break
            tn = tmx
            if tmy < tn:
                tn = tmy
            if tmz < tn:
                tn = tmz
            if tn > max_len:
                break
            if tmx == tn:
                i += si
                tmx += tdx
            if tmy == tn:
                j += sj
                tmy += tdy
            if tmz == tn:
                k += sk
                tmz += tdz
            if i < 0 or i >= nx or j < 0 or j >= ny or k < 0 or k >= nz:
                break
            t = tn
    return n_touched, naive


@njit(cache=True)
def score_view_occlusion(cell_score, occ_prob, nx, ny, nz, gx, gy, gz, res,
                         ox, oy, oz, dirs, max_len, stamp, stamp_val,
                         best, touched):
    """Score one view's rays with occlusion-aware weights.

    Like score_view_unit, but each cell's gain is scaled by the product of
    (1 - P) over the cells already traversed on the same ray."""
    n_rays = dirs.shape[0]
    n_touched = 0
    naive = 0.0
    for r in range(n_rays):
        dx = dirs[r, 0]
        dy = dirs[r, 1]
        dz = dirs[r, 2]
        ok, t, i, j, k, si, sj, sk, tmx, tmy, tmz, tdx, tdy, tdz = _ray_setup(
            ox, oy, oz, dx, dy, dz, gx, gy, gz, res, nx, ny, nz, max_len)
        if not ok:
            continue
        w = 1.0
        while True:
            idx = i + nx * (j + ny * k)
            v = cell_score[idx]
            blocked = v < 0.0 and t > 0.0
            if v < 0.0:
                g = np.float32(-1.0) - v
            else:
                g = v
            wg = np.float32(w * g)
            naive += w * g
            if stamp[idx] != stamp_val:
                stamp[idx] = stamp_val
                touched[n_touched] = idx
                n_touched += 1
                best[idx] = wg
            elif wg > best[idx]:
                best[idx] = wg
            if blocked:
                break
            w *= 1.0 - occ_prob[idx]
            tn = tmx
            if tmy < tn:
                tn = tmy
            if tmz < tn:
                tn = tmz
            if tn > max_len:
                break
            if tmx == tn:
                i += si
                tmx += tdx
            if tmy == tn:
                j += sj
                tmy += tdy
            if tmz == tn:
                k += sk
                tmz += tdz
            if i < 0 or i >= nx or j < 0 or j >= ny or k < 0 or k >= nz:
                break
            t = tn
    return n_touched, naive
