import numpy as np
import pytest

from corola import lowrank, metrics, motion, pipeline, segmentation, synth
from corola.errors import DimensionError


def scene(seed=0, m=600):
    return np.random.default_rng(seed).uniform(0.2, 0.8, m)


def test_static_scene_is_a_fixed_point():
    x = scene()
    model = pipeline.Corola.from_frames([x] * 10, pipeline.Params(rank=1, beta1=0.0), 20, 30)
    for j in range(15):
        res = model.process(x)
        assert not res.mask.any()
        if j >= 9:
            assert np.abs(res.background - x).max() < 1e-6


def test_static_scene_with_ridge_has_bounded_shrinkage():
    x = scene(1)
    p = pipeline.Params(rank=1)
    model = pipeline.Corola.from_frames([x] * 10, p, 20, 30)
    for _ in range(15):
        res = model.process(x)
        assert not res.mask.any()
    # the ridge shrinks coefficients by roughly 2*beta1 relative to least squares
    assert np.abs(res.background - x).max() <= 4 * p.beta1 * x.max()


@pytest.fixture(scope="module")
def rank3_run():
    spec = synth.SyntheticSpec(rank=3, snr=10.0, seed=0)
    seq = synth.generate(spec)
    p = pipeline.Params(rank=synth.effective_rank(3))
    model = pipeline.Corola.from_frames(seq.frames[:p.n_init], p, spec.height, spec.width)
    results = {j: model.process(seq.frames[j]) for j in range(p.n_init, spec.n)}
    return seq, p, results


def test_rank3_high_snr_detection(rank3_run):
    seq, _, results = rank3_run
    f = metrics.mean_defined(metrics.score(results[j].mask, seq.masks[j]).f for j in range(49, 200))
    assert f >= 0.95


def test_rank3_iterations_within_rank(rank3_run):
    _, p, results = rank3_run
    within = np.mean([r.trace.iterations <= p.rank for r in results.values()])
    assert within >= 0.9


def test_trace_invariants(rank3_run):
    _, p, results = rank3_run
    for r in results.values():
        assert 1 <= r.trace.iterations <= p.iteration_cap
        assert np.all(np.isfinite(r.trace.energies))
        assert r.trace.beta2 > 0 and r.trace.gamma == pytest.approx(p.gamma_ratio * r.trace.beta2)
        assert r.background.min() >= 0 and r.background.max() <= 1


def test_commit_restore_round_trip(rng):
    st = pipeline.initialize([scene(k) for k in range(10)], pipeline.Params(rank=2), 20, 30)
    U, acc = pipeline.snapshot_restore(st)
    snap = pipeline.Snapshot(U, st.v.copy(), acc)
    committed = pipeline.snapshot_commit(pipeline.ModelState(**{**st.__dict__, "snapshot": snap}))
    assert np.array_equal(committed.U, st.U) and np.array_equal(committed.acc.B, st.acc.B)
    assert committed.snapshot is None
    U[0, 0] += 1.0  # working copies never alias the committed state
    assert committed.U[0, 0] != U[0, 0]


def test_identical_frames_give_identical_states():
    st = pipeline.initialize([scene(k) for k in range(10)], pipeline.Params(rank=2), 20, 30)
    x = scene(99)
    (r1, s1), (r2, s2) = pipeline.process_frame(st, x), pipeline.process_frame(st, x)
    for a, b in ((s1.U, s2.U), (s1.v, s2.v), (s1.acc.A, s2.acc.A), (s1.acc.B, s2.acc.B),
                 (s1.gmm.weight, s2.gmm.weight), (r1.mask, r2.mask)):
        assert np.array_equal(a, b)


def test_committed_state_is_first_iteration_iterate():
    seq = synth.generate(synth.SyntheticSpec(n=40, rank=2, seed=3))
    p = pipeline.Params(rank=3, max_iters=4)
    st = pipeline.initialize(seq.frames[:10], p, 30, 100)
    for j in range(10, 30):
        st = pipeline.process_frame(st, seq.frames[j])[1]
    x = seq.frames[30]
    res, new = pipeline.process_frame(st, x)
    assert res.trace.iterations > 1  # later iterations happened
    v = lowrank.solve_coefficients(st.U, x, None, p.beta1)
    acc = lowrank.update_accumulators(st.acc, v, x, None)
    U = lowrank.update_basis(st.U, acc, None, p.beta1)
    assert np.array_equal(new.U, U) and np.array_equal(new.v, v)
    assert np.array_equal(new.acc.A, acc.A) and np.array_equal(new.acc.B, acc.B)
    assert new.acc.frames_absorbed == st.acc.frames_absorbed + 1
    assert np.array_equal(res.background, lowrank.reconstruct_background(U, v))


def test_all_foreground_frame_falls_back_to_threshold(caplog, monkeypatch):
    x0 = scene(2)
    p = pipeline.Params(rank=1, max_iters=3)
    st = pipeline.initialize([x0] * 10, p, 20, 30)
    seen = []

    def all_foreground(prob):
        seen.append(prob)
        return np.ones(prob.size, dtype=np.uint8)

    monkeypatch.setattr(segmentation, "segment", all_foreground)
    x = np.clip(x0 + np.random.default_rng(5).normal(0, 0.05, x0.size), 0, 1)
    with caplog.at_level("WARNING"):
        res, new = pipeline.process_frame(st, x)
    assert res.trace.warning == "no-support"
    assert "model not updated" in caplog.text
    assert res.trace.iterations == 1
    assert np.array_equal(res.mask, segmentation.threshold_segment(seen[-1]))
    assert np.array_equal(new.U, st.U) and np.array_equal(new.acc.B, st.acc.B)
    assert np.array_equal(new.gmm.weight, st.gmm.weight)
    assert new.frame_index == st.frame_index + 1


def test_identity_transform_matches_static_mode():
    seq = synth.generate(synth.SyntheticSpec(n=30, seed=1))
    p = pipeline.Params(rank=6)
    a = pipeline.Corola.from_frames(seq.frames[:10], p, 30, 100)
    b = pipeline.Corola.from_frames(seq.frames[:10], p, 30, 100, transforms=[motion.IDENTITY] * 10)
    for x in seq.frames[10:]:
        ra, rb = a.process(x), b.process(x, motion.IDENTITY)
        assert np.array_equal(ra.mask, rb.mask) and np.array_equal(ra.background, rb.background)


def test_auto_beta2_matches_median_oracle(rng):
    e = rng.standard_normal(501) * 0.03
    srt = sorted(e)
    med = srt[250]
    mad = sorted(abs(v - med) for v in e)[250]
    sigma = 1.4826 * mad
    assert pipeline.noise_sigma(e) == pytest.approx(sigma, rel=1e-12)
    assert pipeline.auto_beta2(e, 0.02) == pytest.approx(0.5 * (sigma ** 2 + 0.02 ** 2), rel=1e-12)


def test_frame_energy():
    e = np.array([0.1, -0.2, 0.3, 0.4])
    assert pipeline.frame_energy(e, [0, 0, 1, 1], 0.05) == pytest.approx(0.5 * 0.05 + 0.1)


def test_validation():
    st = pipeline.initialize([scene(k) for k in range(10)], pipeline.Params(rank=1), 20, 30)
    with pytest.raises(DimensionError):
        pipeline.process_frame(st, np.ones(10))
    for bad in ({"rank": 0}, {"rank": 1, "alpha": 2.0}, {"rank": 1, "connectivity": 6},
                {"rank": 1, "beta2": -1.0}, {"rank": 1, "max_iters": 0}):
        with pytest.raises(ValueError):
            pipeline.Params(**bad)
    assert pipeline.Params(rank=3).n_init == 10 and pipeline.Params(rank=12).n_init == 12
