"""Three-state dense voxel grids with exact ray traversal.

The grid is the common currency of the package: ground truth, every
sensor estimate, and every fused estimate are instances of
:class:`VoxelGrid`. Cells take one of three states and the numeric
encoding is ordered so that fusion is a plain elementwise maximum::

    UNKNOWN (0)  <  FREE (1)  <  OCCUPIED (2)

Ray traversal follows the classic voxel-walking scheme: every cell the
segment passes through is visited exactly once, in order, with its entry
and exit distances along the ray.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum
from typing import Iterator

import numpy as np
from scipy import ndimage

from .errors import InvalidArgumentError
from .geometry import Aabb


class CellState(IntEnum):
    UNKNOWN = 0
    FREE = 1
    OCCUPIED = 2


UNKNOWN = np.uint8(CellState.UNKNOWN)
FREE = np.uint8(CellState.FREE)
OCCUPIED = np.uint8(CellState.OCCUPIED)

_DUMP_CHARS = {CellState.OCCUPIED: "#", CellState.FREE: ".", CellState.UNKNOWN: "?"}
_DUMP_STATES = {c: s for s, c in _DUMP_CHARS.items()}


@dataclass(frozen=True)
class Ray:
    """Half-open ray segment with a sensing window [min_range, max_range)."""

    origin: np.ndarray
    direction: np.ndarray
    max_range: float
    min_range: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "origin", np.asarray(self.origin, dtype=np.float64))
        object.__setattr__(self, "direction", np.asarray(self.direction, dtype=np.float64))
        n = float(np.linalg.norm(self.direction))
        if abs(n - 1.0) > 1e-9:
            raise InvalidArgumentError(f"ray direction must be unit length, |d| = {n}")
        if self.max_range <= 0.0 or self.min_range < 0.0 or self.min_range >= self.max_range:
            raise InvalidArgumentError("require 0 <= min_range < max_range")


@dataclass(frozen=True)
class RayHit:
    """First occupied cell seen by a ray; misses are represented by None."""

    cell: tuple[int, int, int]
    distance: float


class VoxelGrid:
    """Dense axis-aligned lattice of CellState values.

    cells is indexed as cells[ix, iy, iz]; the raveled C order therefore
    runs z fastest. The text dump format (see :func:`dump_text`) emits
    x fastest as its own layout and does not depend on memory order.
    """

    __slots__ = ("origin", "resolution", "cells")

    def __init__(self, origin, resolution: float, cells: np.ndarray):
        if resolution <= 0.0:
            raise InvalidArgumentError("resolution must be positive")
        self.origin = np.asarray(origin, dtype=np.float64)
        self.resolution = float(resolution)
        if cells.dtype != np.uint8 or cells.ndim != 3:
            raise InvalidArgumentError("cells must be a 3D uint8 array")
        self.cells = cells

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.cells.shape

    @property
    def bounds(self) -> Aabb:
        return Aabb(self.origin, self.origin + np.array(self.dims) * self.resolution)

    def same_geometry(self, other: "VoxelGrid") -> bool:
        return (
            self.dims == other.dims
            and abs(self.resolution - other.resolution) < 1e-12
            and bool(np.all(np.abs(self.origin - other.origin) < 1e-12))
        )

    def copy(self) -> "VoxelGrid":
        return VoxelGrid(self.origin, self.resolution, self.cells.copy())

    def filled_like(self, fill: CellState) -> "VoxelGrid":
        return VoxelGrid(self.origin, self.resolution, np.full(self.dims, np.uint8(fill)))

    def world_to_index(self, point) -> tuple[int, int, int] | None:
        """Cell containing the point, or None when the point lies outside."""
        rel = (np.asarray(point, dtype=np.float64) - self.origin) / self.resolution
        idx = np.floor(rel).astype(np.int64)
        if np.any(idx < 0) or np.any(idx >= np.array(self.dims)):
            return None
        return int(idx[0]), int(idx[1]), int(idx[2])

    def index_to_center(self, idx) -> np.ndarray:
        return self.origin + (np.asarray(idx, dtype=np.float64) + 0.5) * self.resolution

    def cell_centers(self) -> np.ndarray:
        """(N, 3) centers of all cells in C order of (ix, iy, iz)."""
        nx, ny, nz = self.dims
        ii = np.indices((nx, ny, nz), dtype=np.float64).reshape(3, -1).T
        return self.origin + (ii + 0.5) * self.resolution

    def occupied_indices(self) -> np.ndarray:
        return np.argwhere(self.cells == OCCUPIED)


def new_grid(bounds: Aabb, resolution: float, fill: CellState = CellState.UNKNOWN) -> VoxelGrid:
    """Grid covering the bounds, dims = ceil(extent / resolution) per axis."""
    if resolution <= 0.0:
        raise InvalidArgumentError("resolution must be positive")
    if bounds.is_degenerate():
        raise InvalidArgumentError("bounds must have positive extent on all axes")
    dims = np.ceil(bounds.extent / resolution - 1e-12).astype(np.int64)
    dims = np.maximum(dims, 1)
    cells = np.full(tuple(int(d) for d in dims), np.uint8(fill))
    return VoxelGrid(bounds.lo, resolution, cells)


def traverse(grid: VoxelGrid, ray: Ray) -> Iterator[tuple[int, int, int, float, float]]:
    """Yield (ix, iy, iz, t_entry, t_exit) for every cell the ray crosses.

    Traversal starts where the ray enters the grid (t = 0 when the origin
    is inside) and ends at grid exit; callers break early at their own
    range limits. A ray that never intersects the grid yields nothing.
    """
    lo = grid.origin
    hi = grid.origin + np.array(grid.dims) * grid.resolution
    o = ray.origin
    d = ray.direction

    t0, t1 = 0.0, np.inf
    for a in range(3):
        if abs(d[a]) < 1e-15:
            if o[a] < lo[a] or o[a] >= hi[a]:
                return
        else:
            ta = (lo[a] - o[a]) / d[a]
            tb = (hi[a] - o[a]) / d[a]
            if ta > tb:
                ta, tb = tb, ta
            t0 = max(t0, ta)
            t1 = min(t1, tb)
    if t1 <= t0:
        return

    res = grid.resolution
    nx, ny, nz = grid.dims
    p = o + t0 * d
    ix = min(max(int(np.floor((p[0] - lo[0]) / res)), 0), nx - 1)
    iy = min(max(int(np.floor((p[1] - lo[1]) / res)), 0), ny - 1)
    iz = min(max(int(np.floor((p[2] - lo[2]) / res)), 0), nz - 1)

    step = [0, 0, 0]
    t_max = [np.inf, np.inf, np.inf]
    t_delta = [np.inf, np.inf, np.inf]
    idx = [ix, iy, iz]
    for a in range(3):
        if d[a] > 1e-15:
            step[a] = 1
            t_max[a] = (lo[a] + (idx[a] + 1) * res - o[a]) / d[a]
            t_delta[a] = res / d[a]
        elif d[a] < -1e-15:
            step[a] = -1
            t_max[a] = (lo[a] + idx[a] * res - o[a]) / d[a]
            t_delta[a] = -res / d[a]

    t = t0
    while True:
        # Tie-break on equal boundary distances: x, then y, then z.
        if t_max[0] <= t_max[1] and t_max[0] <= t_max[2]:
            axis = 0
        elif t_max[1] <= t_max[2]:
            axis = 1
        else:
            axis = 2
        t_exit = t_max[axis]
        yield idx[0], idx[1], idx[2], t, t_exit
        idx[axis] += step[axis]
        if idx[axis] < 0 or idx[axis] >= grid.dims[axis]:
            return
        t = t_exit
        t_max[axis] += t_delta[axis]


def cast_ray(truth: VoxelGrid, ray: Ray) -> RayHit | None:
    """First occupied cell whose entry distance falls in [min_range, max_range).

    Occupied cells entered before min_range do not block the ray; the
    result is the entry-face distance of the reported cell. Returns None
    when no occupied cell is met within the window.
    """
    cells = truth.cells
    for ix, iy, iz, t_in, _ in traverse(truth, ray):
        if t_in >= ray.max_range:
            return None
        if cells[ix, iy, iz] == OCCUPIED and t_in >= ray.min_range:
            return RayHit((ix, iy, iz), t_in)
    return None


def integrate_ray(estimate: VoxelGrid, ray: Ray, hit: RayHit | None) -> None:
    """Carve one ray measurement into an estimate grid, in place.

    Cells entered at distance >= min_range and strictly before the hit
    become FREE unless already OCCUPIED (occupied is sticky within a
    frame); the hit cell becomes OCCUPIED. On a miss the carving runs to
    max_range. Segments outside the grid are ignored.
    """
    cells = estimate.cells
    if hit is None:
        for ix, iy, iz, t_in, _ in traverse(estimate, ray):
            if t_in >= ray.max_range:
                return
            if t_in >= ray.min_range and cells[ix, iy, iz] != OCCUPIED:
                cells[ix, iy, iz] = FREE
        return

    target = tuple(hit.cell)
    for ix, iy, iz, t_in, t_out in traverse(estimate, ray):
        # The endpoint is the cell containing the measured distance; the
        # hit cell itself truncates a measurement that overshoots it.
        if (t_in <= hit.distance < t_out) or ((ix, iy, iz) == target and hit.distance >= t_in):
            cells[ix, iy, iz] = OCCUPIED
            return
        if t_in >= hit.distance:
            # Endpoint lies before the traversed segment; nothing behind
            # the measurement may be touched.
            return
        if t_in >= ray.min_range and cells[ix, iy, iz] != OCCUPIED:
            cells[ix, iy, iz] = FREE


def inflate(grid: VoxelGrid, radius: float) -> VoxelGrid:
    """Occupied set dilated by a Euclidean ball of the given radius.

    A cell is occupied in the output iff its center lies within radius of
    some occupied cell center of the input; all other cells keep their
    state. Distances are center-to-center, so radius 0 is the identity.
    """
    if radius < 0.0:
        raise InvalidArgumentError("inflation radius must be non-negative")
    out = grid.copy()
    occ = grid.cells == OCCUPIED
    if radius == 0.0 or not occ.any():
        return out
    # Squared center distances in cell units are integers; rounding the
    # EDT output makes the <= radius comparison exact at lattice radii.
    dist = ndimage.distance_transform_edt(~occ)
    d2 = np.rint(dist * dist)
    reach = (radius / grid.resolution) ** 2 + 1e-9
    out.cells[d2 <= reach] = OCCUPIED
    return out


def occupied_distance_field(grid: VoxelGrid) -> np.ndarray:
    """Per-cell distance (m) from the cell center to the nearest occupied center."""
    occ = grid.cells == OCCUPIED
    if not occ.any():
        return np.full(grid.dims, np.inf)
    return ndimage.distance_transform_edt(~occ) * grid.resolution


def fuse(estimates: list[VoxelGrid]) -> VoxelGrid:
    """Combine estimates cell-wise with precedence OCCUPIED > FREE > UNKNOWN."""
    if not estimates:
        raise InvalidArgumentError("fuse requires at least one grid")
    first = estimates[0]
    for g in estimates[1:]:
        if not g.same_geometry(first):
            raise InvalidArgumentError("fuse requires grids with identical geometry")
    merged = first.cells.copy()
    for g in estimates[1:]:
        np.maximum(merged, g.cells, out=merged)
    return VoxelGrid(first.origin, first.resolution, merged)


@dataclass(frozen=True)
class StateCounts:
    occupied: int
    free: int
    unknown: int

    @property
    def total(self) -> int:
        return self.occupied + self.free + self.unknown


def count_states(grid: VoxelGrid, region) -> StateCounts:
    """Per-state cell counts over the region (anything exposing mask(grid))."""
    mask = region.mask(grid)
    vals = grid.cells[mask]
    counts = np.bincount(vals, minlength=3)
    return StateCounts(occupied=int(counts[2]), free=int(counts[1]), unknown=int(counts[0]))


def dump_text(grid: VoxelGrid) -> str:
    """Debug dump: header, then one character per cell, x fastest, one
    z slice per blank-line-separated paragraph."""
    nx, ny, nz = grid.dims
    ox, oy, oz = grid.origin
    lines = [f"dims {nx} {ny} {nz} resolution {grid.resolution:.6g} origin {ox:.6g} {oy:.6g} {oz:.6g}"]
    lut = np.array([_DUMP_CHARS[CellState.UNKNOWN], _DUMP_CHARS[CellState.FREE], _DUMP_CHARS[CellState.OCCUPIED]])
    for iz in range(nz):
        lines.append("")
        slab = lut[grid.cells[:, :, iz]]
        for iy in range(ny):
            lines.append("".join(slab[:, iy]))
    return "\n".join(lines) + "\n"


def parse_text(text: str) -> VoxelGrid:
    """Inverse of :func:`dump_text`."""
    lines = text.splitlines()
    if not lines:
        raise InvalidArgumentError("empty grid dump")
    head = lines[0].split()
    try:
        assert head[0] == "dims" and head[4] == "resolution" and head[6] == "origin"
        nx, ny, nz = int(head[1]), int(head[2]), int(head[3])
        res = float(head[5])
        origin = np.array([float(head[7]), float(head[8]), float(head[9])])
    except (AssertionError, IndexError, ValueError) as exc:
        raise InvalidArgumentError(f"bad grid dump header: {lines[0]!r}") from exc
    rows = [ln for ln in lines[1:] if ln]
    if len(rows) != ny * nz:
        raise InvalidArgumentError(f"expected {ny * nz} rows, found {len(rows)}")
    cells = np.empty((nx, ny, nz), dtype=np.uint8)
    for iz in range(nz):
        for iy in range(ny):
            row = rows[iz * ny + iy]
            if len(row) != nx:
                raise InvalidArgumentError(f"row length {len(row)} != dims.x {nx}")
            cells[:, iy, iz] = [np.uint8(_DUMP_STATES[c]) for c in row]
    return VoxelGrid(origin, res, cells)
