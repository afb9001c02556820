"""Coverage metrics: six-class confusion tallies, F1, and Cohen's kappa.

Estimates are compared against ground truth inside a region of interest.
Ground truth is two-class (occupied / free); predictions add a third
class, unknown, for cells no sensor observed. The unknown prediction
splits by ground truth into UO (unmonitored occupied) and UF
(unmonitored free).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError
from .grid import OCCUPIED, UNKNOWN, VoxelGrid


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    fn: int
    tn: int
    uo: int
    uf: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn + self.uo + self.uf

    @property
    def truth_occupied(self) -> int:
        return self.tp + self.fn + self.uo

    @property
    def truth_free(self) -> int:
        return self.fp + self.tn + self.uf

    @property
    def unknown(self) -> int:
        return self.uo + self.uf


@dataclass(frozen=True)
class CoverageScores:
    f1: float
    kappa: float


def confusion(estimate: VoxelGrid, truth: VoxelGrid, roi) -> ConfusionCounts:
    """Per-cell classification over the ROI cells.

    truth must contain no unknown cells; the grids must share geometry.
    """
    if not estimate.same_geometry(truth):
        raise InvalidArgumentError("estimate and truth grids differ in geometry")
    return confusion_on_indices(estimate.cells, truth.cells, np.flatnonzero(roi.mask(truth)))


def confusion_on_indices(est_cells: np.ndarray, truth_cells: np.ndarray, flat_idx: np.ndarray) -> ConfusionCounts:
    """Tally over precomputed flat ROI cell indices (hot path of sweeps)."""
    t = truth_cells.reshape(-1)[flat_idx]
    if t.size and int(t.min()) == int(UNKNOWN):
        raise InvalidArgumentError("ground truth contains unknown cells")
    p = est_cells.reshape(-1)[flat_idx]
    # Bins: pred in {0 unknown, 1 free, 2 occupied} x truth in {free, occupied}.
    code = p.astype(np.int64) * 2 + (t == OCCUPIED)
    c = np.bincount(code, minlength=6)
    return ConfusionCounts(
        uf=int(c[0]), uo=int(c[1]),
        tn=int(c[2]), fn=int(c[3]),
        fp=int(c[4]), tp=int(c[5]),
    )


def f1(c: ConfusionCounts) -> float:
    """F1 = 2 TP / (2 TP + FP + FN + UF + UO).

    True negatives do not enter. The denominator is zero only when the
    ROI truth is all free and the prediction marks every cell free; that
    is perfect agreement on the only class present, scored 1.0.
    """
    denom = 2 * c.tp + c.fp + c.fn + c.uf + c.uo
    if denom == 0:
        return 1.0
    return 2.0 * c.tp / denom


def kappa(c: ConfusionCounts) -> float:
    """Three-class Cohen's kappa over {occupied, free, unknown}.

    kappa = (s (TP + TN) - sum_k p_k t_k) / (s^2 - sum_k p_k t_k) with
    p_k the predicted and t_k the true per-class counts; the truth never
    contains unknown cells, so t_unknown = 0. When the denominator
    vanishes (prediction and truth each single-class), the score is 1.0
    on exact agreement and 0.0 otherwise.
    """
    s = c.total
    if s == 0:
        raise InvalidArgumentError("kappa is undefined on an empty region")
    p_occ = c.tp + c.fp
    p_free = c.tn + c.fn
    t_occ = c.truth_occupied
    t_free = c.truth_free
    chance = p_occ * t_occ + p_free * t_free  # p_unknown * t_unknown = 0
    denom = s * s - chance
    if denom == 0:
        return 1.0 if c.tp + c.tn == s else 0.0
    return (s * (c.tp + c.tn) - chance) / denom


def score(estimate: VoxelGrid, truth: VoxelGrid, roi) -> CoverageScores:
    c = confusion(estimate, truth, roi)
    return CoverageScores(f1=f1(c), kappa=kappa(c))


def scores_from_counts(c: ConfusionCounts) -> CoverageScores:
    return CoverageScores(f1=f1(c), kappa=kappa(c))
