"""Numba kernel for batch range sensing.

The kernel mirrors the per-ray traversal in :mod:`perispace.grid` with
identical arithmetic (same epsilons, same axis tie-break), so a batch
frame agrees bit for bit with chaining the public cast_ray/integrate_ray
operations ray by ray. One fused pass per ray both finds the blocking
cell and carves the measurement into the estimate; a small per-call
buffer holds the visited cells so a noise-shortened measurement can be
resolved to its endpoint cell without re-walking.
"""
from __future__ import annotations

import numpy as np
from numba import njit

_OCC = 2
_FREE = 1


@njit(cache=True, nogil=True)
def sense_batch(truth, est, origin, res, origins, dirs, noise, min_range, max_range):
    """Carve one ray bundle into est (uint8, same shape as truth).

    Per ray: the first occupied truth cell entered before max_range
    blocks it. A block entered before min_range yields no reading.
    Otherwise the measured distance is the block entry plus noise,
    clamped to [min_range, max_range]; cells entered at >= min_range and
    strictly before the measured endpoint become FREE (never demoting
    OCCUPIED), and the endpoint cell becomes OCCUPIED. The endpoint
    never lies beyond the blocking cell. Unblocked rays carve FREE out
    to max_range.
    """
    nx, ny, nz = truth.shape
    tflat = truth.reshape(nx * ny * nz)
    eflat = est.reshape(nx * ny * nz)
    lx, ly, lz = origin[0], origin[1], origin[2]
    hx = lx + nx * res
    hy = ly + ny * res
    hz = lz + nz * res
    max_steps = nx + ny + nz + 3
    buf_flat = np.empty(max_steps, dtype=np.int64)
    buf_t = np.empty(max_steps, dtype=np.float64)

    for r in range(origins.shape[0]):
        ox, oy, oz = origins[r, 0], origins[r, 1], origins[r, 2]
        dx, dy, dz = dirs[r, 0], dirs[r, 1], dirs[r, 2]

        # Slab clip against the grid box.
        t0 = 0.0
        t1 = np.inf
        ok = True
        for a in range(3):
            if a == 0:
                d, o, lo, hi = dx, ox, lx, hx
            elif a == 1:
                d, o, lo, hi = dy, oy, ly, hy
            else:
                d, o, lo, hi = dz, oz, lz, hz
            if abs(d) < 1e-15:
                if o < lo or o >= hi:
                    ok = False
                    break
            else:
                ta = (lo - o) / d
                tb = (hi - o) / d
                if ta > tb:
                    ta, tb = tb, ta
                if ta > t0:
                    t0 = ta
                if tb < t1:
                    t1 = tb
        if not ok or t1 <= t0:
            continue

        px = ox + t0 * dx
        py = oy + t0 * dy
        pz = oz + t0 * dz
        ix = int(np.floor((px - lx) / res))
        iy = int(np.floor((py - ly) / res))
        iz = int(np.floor((pz - lz) / res))
        ix = min(max(ix, 0), nx - 1)
        iy = min(max(iy, 0), ny - 1)
        iz = min(max(iz, 0), nz - 1)

        step_x = step_y = step_z = 0
        tmax_x = tmax_y = tmax_z = np.inf
        td_x = td_y = td_z = np.inf
        if dx > 1e-15:
            step_x = 1
            tmax_x = (lx + (ix + 1) * res - ox) / dx
            td_x = res / dx
        elif dx < -1e-15:
            step_x = -1
            tmax_x = (lx + ix * res - ox) / dx
            td_x = -res / dx
        if dy > 1e-15:
            step_y = 1
            tmax_y = (ly + (iy + 1) * res - oy) / dy
            td_y = res / dy
        elif dy < -1e-15:
            step_y = -1
            tmax_y = (ly + iy * res - oy) / dy
            td_y = -res / dy
        if dz > 1e-15:
            step_z = 1
            tmax_z = (lz + (iz + 1) * res - oz) / dz
            td_z = res / dz
        elif dz < -1e-15:
            step_z = -1
            tmax_z = (lz + iz * res - oz) / dz
            td_z = -res / dz

        # Walk, buffering (cell, entry) until a blocker, max_range, or exit.
        n_seen = 0
        t = t0
        block_i = -1  # buffer index of the blocking cell
        while True:
            if t >= max_range:
                break
            f = (ix * ny + iy) * nz + iz
            buf_flat[n_seen] = f
            buf_t[n_seen] = t
            n_seen += 1
            if tflat[f] == _OCC:
                block_i = n_seen - 1
                break
            if tmax_x <= tmax_y and tmax_x <= tmax_z:
                t = tmax_x
                ix += step_x
                if ix < 0 or ix >= nx:
                    break
                tmax_x += td_x
            elif tmax_y <= tmax_z:
                t = tmax_y
                iy += step_y
                if iy < 0 or iy >= ny:
                    break
                tmax_y += td_y
            else:
                t = tmax_z
                iz += step_z
                if iz < 0 or iz >= nz:
                    break
                tmax_z += td_z

        if block_i < 0:
            # Miss: free space out to max_range.
            for k in range(n_seen):
                if buf_t[k] >= min_range:
                    f = buf_flat[k]
                    if eflat[f] != _OCC:
                        eflat[f] = _FREE
            continue

        t_block = buf_t[block_i]
        if t_block < min_range:
            continue  # blocked inside the blind zone: no reading

        m = t_block + noise[r]
        if m < min_range:
            m = min_range
        elif m > max_range:
            m = max_range

        # Endpoint: the buffered cell containing m, never past the blocker.
        end_i = block_i
        if m < t_block:
            end_i = -1
            for k in range(block_i):
                if buf_t[k] <= m < buf_t[k + 1]:
                    end_i = k
                    break
        if end_i < 0:
            continue  # measurement fell before the traversed segment
        for k in range(end_i):
            if buf_t[k] >= min_range:
                f = buf_flat[k]
                if eflat[f] != _OCC:
                    eflat[f] = _FREE
        eflat[buf_flat[end_i]] = _OCC
