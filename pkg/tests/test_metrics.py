import numpy as np
import pytest

from corola import metrics
from corola.errors import DimensionError

from oracles import confusion_loops


def test_identity_and_all_ones():
    gt = np.zeros(50, dtype=np.uint8)
    gt[10:20] = 1
    c = metrics.confusion(gt, gt)
    assert c.fp == 0 and c.fn == 0 and c.tp == 10
    c = metrics.confusion(np.ones(50), np.zeros(50))
    assert (c.fp, c.tp) == (50, 0)


def test_random_pairs_match_loop_counts(rng):
    for _ in range(100):
        m = int(rng.integers(1, 400))
        pred, gt = rng.integers(0, 2, m), rng.integers(0, 2, m)
        c = metrics.confusion(pred, gt)
        assert (c.tp, c.fp, c.tn, c.fn) == confusion_loops(pred, gt)
        assert c.total == m


def test_precision_recall_hand_cases():
    assert metrics.precision_recall(metrics.ConfusionCounts(50, 50, 0, 0)) == (0.5, 1.0)
    assert metrics.precision_recall(metrics.ConfusionCounts(0, 0, 90, 10)) == (None, 0.0)
    assert metrics.precision_recall(metrics.ConfusionCounts(80, 20, 0, 20)) == (0.8, 0.8)
    assert metrics.precision_recall(metrics.ConfusionCounts(0, 0, 10, 0)) == (1.0, 1.0)


def test_f_measure_hand_cases():
    assert metrics.f_measure(1.0, 1.0) == 1.0
    assert metrics.f_measure(0.5, 1.0) == pytest.approx(2 / 3, abs=1e-15)
    assert metrics.f_measure(0.0, 0.0) == 0.0
    assert metrics.f_measure(None, 1.0) is None


def test_region_and_mean():
    pred = np.array([1, 1, 0, 0])
    gt = np.array([1, 0, 0, 1])
    c = metrics.confusion(pred, gt, region=[1, 1, 0, 0])
    assert (c.tp, c.fp, c.tn, c.fn) == (1, 1, 0, 0)
    assert metrics.mean_defined([0.5, None, 1.0]) == 0.75
    assert np.isnan(metrics.mean_defined([None]))
    with pytest.raises(DimensionError):
        metrics.confusion(np.ones(3), np.ones(4))


def test_f_measure_symmetry_and_bounds():
    from hypothesis import given, strategies as st

    @given(st.floats(0, 1), st.floats(0, 1))
    def check(p, r):
        f = metrics.f_measure(p, r)
        assert f == metrics.f_measure(r, p)
        assert 0.0 <= f <= 1.0 and f <= 2 * min(p, r) + 1e-15

    check()
