import itertools
import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from corola import _maxflow_py, segmentation
from corola.errors import DimensionError, NumericalError
from corola.segmentation import MrfProblem

from oracles import enumerate_min_energy, quantized_energy_loops

try:
    from corola import _maxflow
    BACKENDS = {"cython": _maxflow.bk_maxflow, "python": _maxflow_py.bk_maxflow}
except ImportError:
    BACKENDS = {"python": _maxflow_py.bk_maxflow}


@pytest.fixture(params=sorted(BACKENDS))
def backend(request, monkeypatch):
    monkeypatch.setattr(segmentation, "bk_maxflow", BACKENDS[request.param])
    return request.param


def test_energy_hand_cases():
    p = MrfProblem(np.full(10, 0.1), np.full(10, 0.2), 3.0, 2, 5)
    assert segmentation.energy(np.zeros(10), p) == pytest.approx(1.0)
    assert segmentation.energy(np.ones(10), p) == pytest.approx(2.0)
    chk = MrfProblem(np.zeros(4), np.zeros(4), 1.0, 2, 2)
    assert segmentation.energy([1, 0, 0, 1], chk) == 4.0


def test_energy_matches_loop_oracle(rng):
    for conn in (4, 8):
        p = MrfProblem(rng.uniform(size=12), rng.uniform(size=12), 0.3, 3, 4, conn)
        s = rng.integers(0, 2, 12)
        assert segmentation.quantized_energy(s, p) == quantized_energy_loops(
            s, p.unary_bg, p.unary_fg, p.gamma, 3, 4, conn)


def test_zero_gamma_is_strict_threshold(backend, rng):
    e = rng.uniform(0, 1, 60)
    e[:5] = np.sqrt(2 * 0.1)  # exact ties stay background
    p = MrfProblem.from_residual(e, 0.1, 0.0, 6, 10)
    mask = segmentation.segment(p)
    expect = segmentation.quantize(0.5 * e * e) > segmentation.quantize(0.1)
    assert np.array_equal(mask, expect.astype(np.uint8))


def test_free_background_gives_empty_mask(backend):
    for gamma in (0.0, 0.5, 5.0):
        p = MrfProblem(np.zeros(20), np.full(20, 0.3), gamma, 4, 5)
        assert not segmentation.segment(p).any()


def test_single_pixel_and_pair(backend):
    assert segmentation.segment(MrfProblem([1.0], [0.0], 1.0, 1, 1)).tolist() == [1]
    # split labels would be cheaper on unaries, but gamma makes uniform labels win
    p = MrfProblem([1.0, 0.0], [0.0, 0.9], 5.0, 1, 2)
    energies = {s: segmentation.energy(s, p) for s in itertools.product((0, 1), repeat=2)}
    best = min(energies, key=energies.get)
    assert best in ((0, 0), (1, 1))
    assert tuple(segmentation.segment(p)) == best


def test_all_3x3_problems_on_cost_grid(backend):
    g = np.random.default_rng(3)
    levels = np.array([0.0, 0.5, 1.0, 2.0])
    for gamma in (0.0, 0.3, 1.0):
        for _ in range(40):
            ubg, ufg = levels[g.integers(0, 4, 9)], levels[g.integers(0, 4, 9)]
            p = MrfProblem(ubg, ufg, gamma, 3, 3)
            got = segmentation.quantized_energy(segmentation.segment(p), p)
            assert got == enumerate_min_energy(ubg, ufg, gamma, 3, 3, 4)


@settings(max_examples=80, deadline=None)
@given(st.integers(1, 4), st.integers(1, 4), st.sampled_from([4, 8]),
       st.sampled_from([0.0, 0.3, 1.0]), st.integers(0, 2**31 - 1))
def test_cut_is_optimal_and_matches_brute_force(h, w, conn, gamma, seed):
    g = np.random.default_rng(seed)
    p = MrfProblem(g.uniform(0, 2, h * w), g.uniform(0, 2, h * w), gamma, h, w, conn)
    best = segmentation.quantized_energy(segmentation.brute_force_segment(p), p)
    for fn in BACKENDS.values():
        res = _cut_with(fn, p)
        assert segmentation.quantized_energy(res.mask, p) == best
        assert res.flow == best
    s = g.integers(0, 2, h * w)
    assert best <= segmentation.quantized_energy(s, p)


def _cut_with(fn, p):
    saved = segmentation.bk_maxflow
    segmentation.bk_maxflow = fn
    try:
        return segmentation.min_cut(p)
    finally:
        segmentation.bk_maxflow = saved


def test_backends_agree_on_large_grids(rng):
    if len(BACKENDS) < 2:
        pytest.skip("compiled kernel not built")
    for conn in (4, 8):
        e = rng.normal(0, 0.05, 30 * 40)
        e.reshape(30, 40)[10:18, 5:15] += 0.4
        p = MrfProblem.from_residual(e, 5e-4, 1e-3, 30, 40, conn)
        a, b = _cut_with(BACKENDS["cython"], p), _cut_with(BACKENDS["python"], p)
        assert a.flow == b.flow
        assert np.array_equal(a.mask, b.mask)


def test_fewest_foreground_among_ties(backend):
    p = MrfProblem([0.5, 0.5], [0.5, 0.5], 0.0, 1, 2)
    assert segmentation.segment(p).tolist() == [0, 0]


def test_problem_validation():
    with pytest.raises(DimensionError):
        MrfProblem(np.ones(5), np.ones(6), 1.0, 2, 3)
    with pytest.raises(NumericalError):
        MrfProblem(np.array([np.nan] * 6), np.ones(6), 1.0, 2, 3)
    with pytest.raises(ValueError):
        MrfProblem(-np.ones(6), np.ones(6), 1.0, 2, 3)
    with pytest.raises(ValueError):
        MrfProblem(np.ones(6), np.ones(6), 1.0, 2, 3, connectivity=6)
    with pytest.raises(ValueError):
        segmentation.brute_force_segment(MrfProblem(np.ones(21), np.ones(21), 0.0, 3, 7))


def test_grid_edge_counts():
    assert len(segmentation.grid_edges(3, 4, 4)) == 3 * 3 + 2 * 4
    assert len(segmentation.grid_edges(3, 4, 8)) == 3 * 3 + 2 * 4 + 2 * 2 * 3


def test_environment_forces_pure_python_backend():
    env = dict(os.environ, COROLA_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "import corola.segmentation as s; print(s.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 6), st.integers(1, 6), st.sampled_from([4, 8]), st.integers(0, 2**31 - 1))
def test_cut_beats_simple_labelings(h, w, conn, seed):
    g = np.random.default_rng(seed)
    e = g.normal(0, 0.5, h * w)
    p = MrfProblem.from_residual(e, float(g.uniform(0.01, 0.3)), float(g.uniform(0, 0.5)), h, w, conn)
    got = segmentation.quantized_energy(segmentation.segment(p), p)
    for s in (np.zeros(h * w), np.ones(h * w), segmentation.threshold_segment(p)):
        assert got <= segmentation.quantized_energy(s, p)


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 6), st.integers(2, 6), st.integers(0, 2**31 - 1))
def test_raising_beta2_never_adds_foreground(h, w, seed):
    g = np.random.default_rng(seed)
    e = g.normal(0, 0.5, h * w)
    gamma = float(g.uniform(0, 0.3))
    b_lo = float(g.uniform(0.005, 0.2))
    b_hi = b_lo + float(g.uniform(0, 0.2))
    lo = segmentation.segment(MrfProblem.from_residual(e, b_lo, gamma, h, w))
    hi = segmentation.segment(MrfProblem.from_residual(e, b_hi, gamma, h, w))
    assert hi.sum() <= lo.sum()
    assert not (hi & ~lo.astype(bool)).any()  # the smallest minimizers are nested
