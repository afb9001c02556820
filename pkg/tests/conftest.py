"""Shared fixtures and independent oracles used across the test suite.

The oracles deliberately avoid the library's traversal and tallying
code paths: ray casting is checked against dense point sampling along
the ray, and confusion counts against a per-cell double loop.
"""
from __future__ import annotations

import numpy as np
import pytest

from perispace.fixtures import bundled_scene_path
from perispace.grid import OCCUPIED, Ray, VoxelGrid
from perispace.metrics import ConfusionCounts
from perispace.scene import load_scene_file, voxelize


def _sampled_cells(grid: VoxelGrid, ray: Ray, step_frac: float):
    """Ordered (cell, entry) pairs by dense sampling along the ray.

    Samples every resolution * step_frac metres; whenever the containing
    cell changes between consecutive samples, the crossing is bisected so
    that corner clips thinner than the base step are still found. A
    straight ray's cell indices advance monotonically per axis, so once
    two samples sit in L1-adjacent cells nothing can hide between them.
    Uses only point-in-cell queries, independent of the walking scheme.
    """
    origin = np.asarray(ray.origin, dtype=np.float64)
    direction = np.asarray(ray.direction, dtype=np.float64)
    dims = np.array(grid.dims)

    def cell_at(t: float):
        return grid.world_to_index(origin + t * direction)

    out: list[tuple[tuple[int, int, int], float]] = []
    seen: set[tuple[int, int, int]] = set()

    def record(idx, t):
        if idx is not None and idx not in seen:
            seen.add(idx)
            out.append((idx, t))

    def refine(t0, c0, t1, c1):
        # c0 != c1: find every cell crossed in between, in order.
        if t1 - t0 < 1e-10:
            return
        if c0 is not None and c1 is not None:
            if sum(abs(a - b) for a, b in zip(c0, c1)) <= 1:
                return  # adjacent cells share a face: no intermediate
        tm = 0.5 * (t0 + t1)
        cm = cell_at(tm)
        if cm != c0:
            refine(t0, c0, tm, cm)
        record(cm, tm)
        if cm != c1:
            refine(tm, cm, t1, c1)

    step = grid.resolution * step_frac
    n = int(np.ceil(ray.max_range / step))
    ts = np.minimum(np.arange(n + 1) * step, ray.max_range)
    pts = origin[None, :] + ts[:, None] * direction[None, :]
    rel = np.floor((pts - grid.origin) / grid.resolution).astype(np.int64)
    inside = np.all((rel >= 0) & (rel < dims), axis=1)

    c_prev = (int(rel[0, 0]), int(rel[0, 1]), int(rel[0, 2])) if inside[0] else None
    record(c_prev, float(ts[0]))
    t_prev = float(ts[0])
    for k in range(1, len(ts)):
        c = (int(rel[k, 0]), int(rel[k, 1]), int(rel[k, 2])) if inside[k] else None
        if c != c_prev:
            refine(t_prev, c_prev, float(ts[k]), c)
            record(c, float(ts[k]))
        t_prev, c_prev = float(ts[k]), c
    return out


def oracle_cast(truth: VoxelGrid, ray: Ray, step_frac: float = 1.0 / 50.0):
    """Dense-sampling reference for cast_ray: the first occupied cell
    whose entry distance falls in [min_range, max_range), or None."""
    for idx, entry in _sampled_cells(truth, ray, step_frac):
        if entry >= ray.max_range:
            return None
        if truth.cells[idx] == OCCUPIED and entry >= ray.min_range:
            return idx, entry
    return None


def oracle_visited_cells(grid: VoxelGrid, ray: Ray, step_frac: float = 1.0 / 50.0):
    """Every cell the ray crosses before max_range, by dense sampling."""
    return {idx for idx, entry in _sampled_cells(grid, ray, step_frac) if entry < ray.max_range}


def brute_confusion(estimate: VoxelGrid, truth: VoxelGrid, roi) -> ConfusionCounts:
    """Naive per-cell tally over every grid cell whose center is in the ROI."""
    tp = fp = fn = tn = uo = uf = 0
    nx, ny, nz = truth.dims
    for ix in range(nx):
        for iy in range(ny):
            for iz in range(nz):
                center = truth.index_to_center((ix, iy, iz))
                if not bool(roi.contains(center[None, :])[0]):
                    continue
                t = int(truth.cells[ix, iy, iz])
                p = int(estimate.cells[ix, iy, iz])
                if p == 2:
                    tp, fp = (tp + 1, fp) if t == 2 else (tp, fp + 1)
                elif p == 1:
                    fn, tn = (fn + 1, tn) if t == 2 else (fn, tn + 1)
                else:
                    uo, uf = (uo + 1, uf) if t == 2 else (uo, uf + 1)
    return ConfusionCounts(tp=tp, fp=fp, fn=fn, tn=tn, uo=uo, uf=uf)


def random_unit(rng: np.random.Generator) -> np.ndarray:
    v = rng.normal(size=3)
    return v / np.linalg.norm(v)


@pytest.fixture(scope="session")
def scene_reach():
    return load_scene_file(bundled_scene_path("reach"))


@pytest.fixture(scope="session")
def scene_lean():
    return load_scene_file(bundled_scene_path("lean"))


@pytest.fixture(scope="session")
def scene_occlude():
    return load_scene_file(bundled_scene_path("occlude"))


@pytest.fixture(scope="session")
def scene_walk():
    return load_scene_file(bundled_scene_path("walk"))


@pytest.fixture(scope="session")
def truth_reach(scene_reach):
    return voxelize(scene_reach, 0.05)


@pytest.fixture(scope="session")
def truth_occlude(scene_occlude):
    return voxelize(scene_occlude, 0.05)
