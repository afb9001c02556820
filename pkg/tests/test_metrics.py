"""Metric formula oracles and properties.

The fixed fixtures below were computed by hand from the defining
formulas: F1 = 2TP/(2TP+FP+FN+UF+UO) and the three-class kappa
(s(TP+TN) - sum p_k t_k) / (s^2 - sum p_k t_k) with t_unknown = 0.
"""
from __future__ import annotations

from fractions import Fraction

import numpy as np
import pytest

from perispace.errors import InvalidArgumentError
from perispace.geometry import Aabb
from perispace.grid import CellState, new_grid
from perispace.metrics import ConfusionCounts, confusion, f1, kappa, score
from perispace.scene import HumanBoxRoi

from conftest import brute_confusion


def cc(tp=0, fp=0, fn=0, tn=0, uo=0, uf=0):
    return ConfusionCounts(tp=tp, fp=fp, fn=fn, tn=tn, uo=uo, uf=uf)


def hand_kappa(c: ConfusionCounts) -> Fraction:
    s = c.total
    p = (c.tp + c.fp, c.tn + c.fn, c.uo + c.uf)
    t = (c.tp + c.fn + c.uo, c.fp + c.tn + c.uf, 0)
    chance = sum(pk * tk for pk, tk in zip(p, t))
    return Fraction(s * (c.tp + c.tn) - chance, s * s - chance)


def hand_f1(c: ConfusionCounts) -> Fraction:
    return Fraction(2 * c.tp, 2 * c.tp + c.fp + c.fn + c.uf + c.uo)


# (counts, expected f1, expected kappa); None marks degenerate-convention rows
# whose expectations are stated directly.
HAND_CASES = [
    (cc(tp=100), 1.0, 1.0),
    (cc(tp=0, fn=3, tn=5), 0.0, None),
    (cc(tp=2, fp=1, fn=1, uo=2, uf=0), 0.5, None),  # 4/8 by direct evaluation
    (cc(tp=40, tn=40, fp=5, fn=5, uf=10), None, 3500 / 5500),  # worked example
    (cc(tp=10, tn=10), 1.0, 1.0),
    (cc(uo=6, uf=4), 0.0, 0.0),  # all-unknown prediction
    (cc(tn=9), 1.0, 1.0),  # all-free truth, all-free prediction
    (cc(fp=9), 0.0, 0.0),  # all-free truth, all-occupied prediction
    (cc(tp=9), 1.0, 1.0),  # all-occupied truth and prediction
    (cc(fn=9), 0.0, 0.0),  # all-occupied truth, all-free prediction
    (cc(uf=9), 0.0, 0.0),
    (cc(uo=9), 0.0, 0.0),
    (cc(tp=1, tn=1), 1.0, 1.0),
    (cc(tp=3, fp=1), None, None),
    (cc(tp=3, fn=1), None, None),
    (cc(tp=3, uo=1), None, None),
    (cc(tn=3, fn=1), 0.0, None),
    (cc(tp=50, tn=30, fp=10, fn=5, uo=3, uf=2), None, None),
    (cc(tp=1, fp=2, fn=3, tn=4, uo=5, uf=6), None, None),
    (cc(tp=7, fp=0, fn=0, tn=0, uo=0, uf=3), None, None),
    (cc(tp=12, fp=4, fn=2, tn=80, uo=1, uf=1), None, None),
    (cc(tp=0, fp=0, fn=0, tn=50, uo=0, uf=50), 0.0, None),
]


class TestHandComputedFixtures:
    @pytest.mark.parametrize("case", HAND_CASES, ids=range(len(HAND_CASES)))
    def test_f1_matches_hand_value(self, case):
        counts, expect_f1, _ = case
        denom = 2 * counts.tp + counts.fp + counts.fn + counts.uf + counts.uo
        want = float(hand_f1(counts)) if denom else 1.0
        if expect_f1 is not None:
            assert want == pytest.approx(expect_f1, abs=1e-12)
        assert f1(counts) == pytest.approx(want, abs=1e-12)

    @pytest.mark.parametrize("case", HAND_CASES, ids=range(len(HAND_CASES)))
    def test_kappa_matches_hand_value(self, case):
        counts, _, expect_k = case
        s = counts.total
        p = (counts.tp + counts.fp, counts.tn + counts.fn, counts.uo + counts.uf)
        t = (counts.truth_occupied, counts.truth_free, 0)
        chance = sum(pk * tk for pk, tk in zip(p, t))
        if s * s - chance == 0:
            want = 1.0 if counts.tp + counts.tn == s else 0.0
        else:
            want = float(hand_kappa(counts))
        if expect_k is not None:
            assert want == pytest.approx(expect_k, abs=1e-12)
        assert kappa(counts) == pytest.approx(want, abs=1e-12)

    def test_worked_kappa_example_exact(self):
        c = cc(tp=40, tn=40, fp=5, fn=5, uf=10)
        # p = (45, 45, 10), t = (45, 55, 0), sum p_k t_k = 4500.
        assert kappa(c) == pytest.approx(3500 / 5500, abs=1e-12)
        assert kappa(c) == pytest.approx(0.636364, abs=5e-7)

    def test_kappa_rejects_empty_region(self):
        with pytest.raises(InvalidArgumentError):
            kappa(cc())


class TestDegenerateConventions:
    def test_f1_empty_denominator_is_one(self):
        assert f1(cc(tn=42)) == 1.0
        assert f1(cc()) == 1.0

    def test_kappa_single_class_agreement(self):
        assert kappa(cc(tn=5)) == 1.0
        assert kappa(cc(tp=5)) == 1.0


class TestProperties:
    def test_f1_bounds_and_kappa_range_on_random_confusions(self):
        rng = np.random.default_rng(21)
        for _ in range(500):
            parts = rng.multinomial(int(rng.integers(1, 10_000)), np.full(6, 1 / 6))
            c = cc(*(int(v) for v in parts))
            v1, vk = f1(c), kappa(c)
            assert 0.0 <= v1 <= 1.0
            assert -1.0 - 1e-12 <= vk <= 1.0 + 1e-12

    def test_f1_improves_when_fn_or_uo_becomes_tp(self):
        rng = np.random.default_rng(22)
        for _ in range(200):
            parts = [int(v) for v in rng.integers(0, 50, 6)]
            c = cc(*parts)
            if c.fn > 0:
                better = cc(c.tp + 1, c.fp, c.fn - 1, c.tn, c.uo, c.uf)
                assert f1(better) >= f1(c)
            if c.uo > 0:
                better = cc(c.tp + 1, c.fp, c.fn, c.tn, c.uo - 1, c.uf)
                assert f1(better) >= f1(c)

    def test_chance_level_prediction_scores_zero_kappa(self):
        # All-occupied prediction on balanced truth: kappa is exactly 0.
        c = cc(tp=50, fp=50)
        assert kappa(c) == pytest.approx(0.0, abs=1e-15)


class TestConfusionOnGrids:
    def _random_pair(self, rng, n=6):
        truth = new_grid(Aabb([0, 0, 0], [n * 0.1] * 3), 0.1, CellState.FREE)
        truth.cells[rng.random(truth.dims) < 0.3] = 2
        est = truth.filled_like(CellState.UNKNOWN)
        est.cells[:] = rng.integers(0, 3, est.dims).astype(np.uint8)
        return est, truth

    def test_identity_estimate_is_perfect(self):
        rng = np.random.default_rng(31)
        est, truth = self._random_pair(rng)
        roi = HumanBoxRoi(Aabb([0, 0, 0], [0.6, 0.6, 0.6]))
        c = confusion(truth, truth, roi)
        assert c.fp == c.fn == c.uo == c.uf == 0
        s = score(truth, truth, roi)
        assert s.f1 == 1.0 and s.kappa == 1.0

    def test_all_unknown_estimate(self):
        rng = np.random.default_rng(32)
        _, truth = self._random_pair(rng)
        est = truth.filled_like(CellState.UNKNOWN)
        roi = HumanBoxRoi(Aabb([0, 0, 0], [0.6, 0.6, 0.6]))
        c = confusion(est, truth, roi)
        assert c.tp == c.fp == c.fn == c.tn == 0
        assert c.uo == c.truth_occupied and c.uf == c.truth_free
        s = score(est, truth, roi)
        assert s.f1 == 0.0 and s.kappa == 0.0

    def test_matches_double_loop_oracle(self):
        rng = np.random.default_rng(33)
        for _ in range(5):
            est, truth = self._random_pair(rng)
            roi = HumanBoxRoi(Aabb([0.05, 0.05, 0.05], [0.45, 0.55, 0.35]))
            assert confusion(est, truth, roi) == brute_confusion(est, truth, roi)

    def test_rejects_unknown_truth(self):
        truth = new_grid(Aabb([0, 0, 0], [0.3, 0.3, 0.3]), 0.1, CellState.UNKNOWN)
        est = truth.copy()
        roi = HumanBoxRoi(Aabb([0, 0, 0], [0.3, 0.3, 0.3]))
        with pytest.raises(InvalidArgumentError):
            confusion(est, truth, roi)

    def test_rejects_geometry_mismatch(self):
        a = new_grid(Aabb([0, 0, 0], [0.3, 0.3, 0.3]), 0.1, CellState.FREE)
        b = new_grid(Aabb([0, 0, 0], [0.3, 0.3, 0.3]), 0.15, CellState.FREE)
        roi = HumanBoxRoi(Aabb([0, 0, 0], [0.3, 0.3, 0.3]))
        with pytest.raises(InvalidArgumentError):
            confusion(a, b, roi)

    def test_counts_partition_the_region(self):
        rng = np.random.default_rng(34)
        est, truth = self._random_pair(rng)
        roi = HumanBoxRoi(Aabb([0, 0, 0], [0.6, 0.6, 0.6]))
        c = confusion(est, truth, roi)
        assert c.total == int(roi.mask(truth).sum())
