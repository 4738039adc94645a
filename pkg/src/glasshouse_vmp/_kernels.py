"""Numba kernels for the voxel map hot loops.

All kernels operate on the map's dense uint8 state grid (and, for fusion, on
the float32 log-odds grids) indexed as ``state[i, j, k]`` with cell (i,j,k)
covering the world interval ``origin + [i, i+1) * res`` per axis.

Cell states share one encoding with :mod:`glasshouse_vmp.voxel_map`:
0 = unknown, 1 = free, 2 = occupied, 3 = region of interest.

Ray traversal is an integer grid walk (Amanatides/Woo style): a cell is
visited if the ray segment enters it at arc length <= max_range; occupied and
ROI cells terminate the walk, unknown and free cells are transparent.
"""
from __future__ import annotations

import numpy as np
from numba import njit

UNKNOWN = 0
FREE = 1
OCCUPIED = 2
ROI = 3


@njit(cache=True)
def cast_ray_batch(state, org, res, p0s, dirs, max_range, collect_free):
    """Walk a batch of rays through the state grid.

    Parameters are float64 arrays; `p0s` (n,3) ray origins in world frame,
    `dirs` (n,3) unit directions. Returns per-ray terminal linear index (-1
    if none), terminal state, and flat buffers of traversed unknown / free
    linear cell indices with per-ray offset arrays.
    """
    n = p0s.shape[0]
    nx, ny, nz = state.shape
    max_cells = int(3.0 * max_range / res) + 9
    term_lin = np.full(n, -1, np.int64)
    term_state = np.zeros(n, np.uint8)
    unk = np.empty(n * max_cells, np.int64)
    unk_off = np.zeros(n + 1, np.int64)
    nfree_cap = n * max_cells if collect_free else 1
    free = np.empty(nfree_cap, np.int64)
    free_off = np.zeros(n + 1, np.int64)
    nu = 0
    nf = 0
    for r in range(n):
        px = p0s[r, 0] - org[0]
        py = p0s[r, 1] - org[1]
        pz = p0s[r, 2] - org[2]
        dx = dirs[r, 0]
        dy = dirs[r, 1]
        dz = dirs[r, 2]
        i = int(np.floor(px / res))
        j = int(np.floor(py / res))
        k = int(np.floor(pz / res))

        if dx > 0.0:
            step_x = 1
            t_max_x = ((i + 1) * res - px) / dx
            t_d_x = res / dx
        elif dx < 0.0:
            step_x = -1
            t_max_x = (i * res - px) / dx
            t_d_x = -res / dx
        else:
            step_x = 0
            t_max_x = np.inf
            t_d_x = np.inf
        if dy > 0.0:
            step_y = 1
            t_max_y = ((j + 1) * res - py) / dy
            t_d_y = res / dy
        elif dy < 0.0:
            step_y = -1
            t_max_y = (j * res - py) / dy
            t_d_y = -res / dy
        else:
            step_y = 0
            t_max_y = np.inf
            t_d_y = np.inf
        if dz > 0.0:
            step_z = 1
            t_max_z = ((k + 1) * res - pz) / dz
            t_d_z = res / dz
        elif dz < 0.0:
            step_z = -1
            t_max_z = (k * res - pz) / dz
            t_d_z = -res / dz
        else:
            step_z = 0
            t_max_z = np.inf
            t_d_z = np.inf

        while True:
            if i < 0 or i >= nx or j < 0 or j >= ny or k < 0 or k >= nz:
                break
            s = state[i, j, k]
            if s >= OCCUPIED:
                term_lin[r] = (i * ny + j) * nz + k
                term_state[r] = s
                break
            if s == UNKNOWN:
                unk[nu] = (i * ny + j) * nz + k
                nu += 1
            elif collect_free:
                free[nf] = (i * ny + j) * nz + k
                nf += 1
            if t_max_x <= t_max_y and t_max_x <= t_max_z:
                if t_max_x > max_range:
                    break
                i += step_x
                t_max_x += t_d_x
            elif t_max_y <= t_max_z:
                if t_max_y > max_range:
                    break
                j += step_y
                t_max_y += t_d_y
            else:
                if t_max_z > max_range:
                    break
                k += step_z
                t_max_z += t_d_z
        unk_off[r + 1] = nu
        free_off[r + 1] = nf
    return term_lin, term_state, unk[:nu], unk_off, free[:nf], free_off


@njit(cache=True, inline="always")
def _clamp(v, lo, hi):
    if v < lo:
        return lo
    if v > hi:
        return hi
    return v


@njit(cache=True, inline="always")
def _update_state(occ, roi, state, i, j, k, occ_thr, roi_thr):
    if occ[i, j, k] >= occ_thr:
        if roi[i, j, k] >= roi_thr:
            state[i, j, k] = ROI
        else:
            state[i, j, k] = OCCUPIED
    else:
        state[i, j, k] = FREE


@njit(cache=True)
def integrate_batch(occ, roi, state, free_stamp, hit_stamp, fruit_stamp,
                    done_stamp, stamp_id, origin, pts, flags, org, res,
                    l_hit, l_miss, r_hit, r_miss, clamp_lo, clamp_hi,
                    occ_thr, roi_thr):
    """Fuse one point cloud: free-space carving plus endpoint hits.

    Each cell is updated at most once per cloud per role; a cell that is an
    endpoint of any ray this cloud never receives a free-space update (hit
    wins over miss). The fruit flag of an endpoint cell is the OR over all
    points landing in it. Rays whose endpoint lies outside the grid carve
    free space up to the grid boundary and make no endpoint update.
    """
    n = pts.shape[0]
    nx, ny, nz = state.shape

    # pass 1: stamp endpoint cells (and their fruit evidence)
    for idx in range(n):
        ei = int(np.floor((pts[idx, 0] - org[0]) / res))
        ej = int(np.floor((pts[idx, 1] - org[1]) / res))
        ek = int(np.floor((pts[idx, 2] - org[2]) / res))
        if 0 <= ei < nx and 0 <= ej < ny and 0 <= ek < nz:
            hit_stamp[ei, ej, ek] = stamp_id
            if flags[idx]:
                fruit_stamp[ei, ej, ek] = stamp_id

    ox = origin[0] - org[0]
    oy = origin[1] - org[1]
    oz = origin[2] - org[2]

    # pass 2: free-space carving along each ray, endpoint cell excluded
    for idx in range(n):
        wx = pts[idx, 0] - org[0]
        wy = pts[idx, 1] - org[1]
        wz = pts[idx, 2] - org[2]
        dx = wx - ox
        dy = wy - oy
        dz = wz - oz
        dist = np.sqrt(dx * dx + dy * dy + dz * dz)
        if dist < 1e-12:
            continue
        dx /= dist
        dy /= dist
        dz /= dist
        ei = int(np.floor(wx / res))
        ej = int(np.floor(wy / res))
        ek = int(np.floor(wz / res))
        i = int(np.floor(ox / res))
        j = int(np.floor(oy / res))
        k = int(np.floor(oz / res))

        if dx > 0.0:
            step_x = 1
            t_max_x = ((i + 1) * res - ox) / dx
            t_d_x = res / dx
        elif dx < 0.0:
            step_x = -1
            t_max_x = (i * res - ox) / dx
            t_d_x = -res / dx
        else:
            step_x = 0
            t_max_x = np.inf
            t_d_x = np.inf
        if dy > 0.0:
            step_y = 1
            t_max_y = ((j + 1) * res - oy) / dy
            t_d_y = res / dy
        elif dy < 0.0:
            step_y = -1
            t_max_y = (j * res - oy) / dy
            t_d_y = -res / dy
        else:
            step_y = 0
            t_max_y = np.inf
            t_d_y = np.inf
        if dz > 0.0:
            step_z = 1
            t_max_z = ((k + 1) * res - oz) / dz
            t_d_z = res / dz
        elif dz < 0.0:
            step_z = -1
            t_max_z = (k * res - oz) / dz
            t_d_z = -res / dz
        else:
            step_z = 0
            t_max_z = np.inf
            t_d_z = np.inf

        while True:
            if i == ei and j == ej and k == ek:
                break
            if i < 0 or i >= nx or j < 0 or j >= ny or k < 0 or k >= nz:
                break
            if hit_stamp[i, j, k] != stamp_id and free_stamp[i, j, k] != stamp_id:
                free_stamp[i, j, k] = stamp_id
                occ[i, j, k] = _clamp(occ[i, j, k] + l_miss, clamp_lo, clamp_hi)
                _update_state(occ, roi, state, i, j, k, occ_thr, roi_thr)
            if t_max_x <= t_max_y and t_max_x <= t_max_z:
                if t_max_x > dist:
                    break
                i += step_x
                t_max_x += t_d_x
            elif t_max_y <= t_max_z:
                if t_max_y > dist:
                    break
                j += step_y
                t_max_y += t_d_y
            else:
                if t_max_z > dist:
                    break
                k += step_z
                t_max_z += t_d_z

    # pass 3: one occupancy + ROI update per endpoint cell
    for idx in range(n):
        ei = int(np.floor((pts[idx, 0] - org[0]) / res))
        ej = int(np.floor((pts[idx, 1] - org[1]) / res))
        ek = int(np.floor((pts[idx, 2] - org[2]) / res))
        if 0 <= ei < nx and 0 <= ej < ny and 0 <= ek < nz:
            if done_stamp[ei, ej, ek] != stamp_id:
                done_stamp[ei, ej, ek] = stamp_id
                occ[ei, ej, ek] = _clamp(occ[ei, ej, ek] + l_hit, clamp_lo, clamp_hi)
                if fruit_stamp[ei, ej, ek] == stamp_id:
                    roi[ei, ej, ek] = _clamp(roi[ei, ej, ek] + r_hit, clamp_lo, clamp_hi)
                else:
                    roi[ei, ej, ek] = _clamp(roi[ei, ej, ek] + r_miss, clamp_lo, clamp_hi)
                _update_state(occ, roi, state, ei, ej, ek, occ_thr, roi_thr)


@njit(cache=True)
def sphere_path_blocked(state, org, res, samples, clearance):
    """True iff any sample's clearance sphere touches an occupied/ROI cell.

    A cell blocks if the closest point of its cube lies within `clearance`
    of the sample. Cells outside the grid are unknown and never block.
    """
    n = samples.shape[0]
    nx, ny, nz = state.shape
    c2 = clearance * clearance
    for s in range(n):
        sx = samples[s, 0] - org[0]
        sy = samples[s, 1] - org[1]
        sz = samples[s, 2] - org[2]
        i0 = int(np.floor((sx - clearance) / res))
        i1 = int(np.floor((sx + clearance) / res))
        j0 = int(np.floor((sy - clearance) / res))
        j1 = int(np.floor((sy + clearance) / res))
        k0 = int(np.floor((sz - clearance) / res))
        k1 = int(np.floor((sz + clearance) / res))
        for i in range(max(i0, 0), min(i1, nx - 1) + 1):
            cx = _clamp(sx, i * res, (i + 1) * res)
            ddx = sx - cx
            for j in range(max(j0, 0), min(j1, ny - 1) + 1):
                cy = _clamp(sy, j * res, (j + 1) * res)
                ddy = sy - cy
                for k in range(max(k0, 0), min(k1, nz - 1) + 1):
                    if state[i, j, k] >= OCCUPIED:
                        cz = _clamp(sz, k * res, (k + 1) * res)
                        ddz = sz - cz
                        if ddx * ddx + ddy * ddy + ddz * ddz <= c2:
                            return True
    return False
