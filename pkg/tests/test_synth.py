import numpy as np
import pytest

from corola import synth


def _walk(n, span):
    """Step-by-step bounce: move one pixel, reverse direction at either border."""
    pos, step, out = 0, 1, []
    for _ in range(n):
        out.append(pos)
        if not 0 <= pos + step <= span:
            step = -step
        pos += step
    return out


def test_bounce_trajectory_and_masks():
    spec = synth.SyntheticSpec(n=199, seed=2)
    seq = synth.generate(spec)
    expect = _walk(199, 90)
    assert seq.positions.tolist() == expect
    assert expect[90] == 90 and expect[91] == 89
    top = (30 - 10) // 2
    for j in (0, 57, 90, 150, 198):
        img = seq.masks[j].reshape(30, 100)
        rows, cols = np.nonzero(img)
        assert (rows.min(), rows.max()) == (top, top + 9)
        assert (cols.min(), cols.max()) == (expect[j], expect[j] + 9)
        assert img.sum() == 100


def test_noise_free_frames_equal_rescaled_background():
    seq = synth.generate(synth.SyntheticSpec(n=30, snr=np.inf, seed=1))
    bg = ~seq.masks.astype(bool)
    assert np.array_equal(seq.frames[bg], seq.background[bg])
    assert np.allclose(seq.background * seq.scale + seq.offset, seq.raw_background)


def test_empirical_snr_within_five_percent():
    for snr in (1.0, 4.0, 10.0):
        seq = synth.generate(synth.SyntheticSpec(n=200, snr=snr, seed=5))
        got = np.sqrt(seq.raw_background.var() / seq.noise.var())
        assert abs(got - snr) / snr < 0.05


def test_frames_in_unit_range_and_deterministic():
    a = synth.generate(synth.SyntheticSpec(n=20, seed=9))
    b = synth.generate(synth.SyntheticSpec(n=20, seed=9))
    assert a.frames.min() == 0.0 and a.frames.max() == 1.0
    assert np.array_equal(a.frames, b.frames)


def test_background_rank_and_effective_rank():
    seq = synth.generate(synth.SyntheticSpec(n=40, rank=3, seed=0))
    sv = np.linalg.svd(seq.background, compute_uv=False)
    assert sv[synth.effective_rank(3)] / sv[0] < 1e-10
    assert sv[3] / sv[0] > 1e-6
    assert synth.effective_rank(5) == 6


def test_spec_validation():
    with pytest.raises(ValueError):
        synth.SyntheticSpec(snr=0)
    with pytest.raises(ValueError):
        synth.SyntheticSpec(object_width=200)
    with pytest.raises(ValueError):
        synth.SyntheticSpec(n=0)


def test_panning_sequence_is_consistent():
    pan = synth.generate_panning(n=15, snr=np.inf, object_width=4, object_height=4)
    # a static background column seen in two consecutive frames moves left by one
    for j in range(1, 15):
        prev = pan.frames[j - 1].reshape(30, 100)
        cur = pan.frames[j].reshape(30, 100)
        free = ~(pan.masks[j - 1].reshape(30, 100)[:, 1:].astype(bool)
                 | pan.masks[j].reshape(30, 100)[:, :-1].astype(bool))
        assert np.array_equal(cur[:, :-1][free], prev[:, 1:][free])
        assert not pan.in_view[j].reshape(30, 100)[:, -1].any()
    assert np.array_equal(pan.transforms[1], [[1, 0, -1], [0, 1, 0]])
