import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from perceptloss import F0Contour, F0Params, Waveform, align_contours, extract_f0, interpolate_unvoiced, pcc_loss
from perceptloss.errors import ContourTooShort, DegenerateContour, NoVoicedFrames, SignalTooShort
from perceptloss.pitch import pcc_from_arrays, pcc_loss_waveforms, read_contour_csv, write_contour_csv

from signals import add_white_noise, chirp, chirp_inst_freq, tone


def contour(values):
    return F0Contour.from_hz(values)


def test_tone_220():
    c = extract_f0(tone(220.0))
    assert c.voiced.all()
    assert np.all(np.abs(c.f0_hz - 220.0) <= 1.0)
    # no octave errors
    assert not np.any(np.abs(c.f0_hz - 110.0) <= 5.0)
    assert not np.any(np.abs(c.f0_hz - 440.0) <= 5.0)


@pytest.mark.parametrize("freq", [72.0, 98.0, 147.0, 261.6, 390.0])
def test_tones_across_range(freq):
    c = extract_f0(add_white_noise(tone(freq, seconds=0.6), 30, 1))
    assert c.voiced.all()
    assert np.all(np.abs(c.f0_hz - freq) <= 1.0)


def test_silence_has_no_voiced_frames():
    with pytest.raises(NoVoicedFrames):
        extract_f0(Waveform(np.zeros(24000), 24000))


def test_white_noise_mostly_unvoiced():
    rng = np.random.default_rng(0)
    w = Waveform(0.3 * rng.standard_normal(24000), 24000)
    try:
        c = extract_f0(w, F0Params(voicing_threshold=0.5))
    except NoVoicedFrames:
        return
    assert c.voiced.mean() < 0.2


def test_chirp_monotone_and_tracks_instantaneous_frequency():
    p = F0Params()
    c = extract_f0(chirp(100.0, 200.0), p)
    f = c.f0_hz[c.voiced]
    assert np.all(np.diff(f) >= -2.0)
    t = c.times_s(p.frame_len)[c.voiced]
    assert np.all(np.abs(f - chirp_inst_freq(100.0, 200.0, t)) <= 2.0)


def test_too_short_signal():
    with pytest.raises(SignalTooShort):
        extract_f0(tone(220.0, seconds=0.05))


def test_voiced_invariant_holds():
    p = F0Params()
    x = tone(150.0, seconds=1.0).samples.copy()
    x[8000:14000] = 0.0
    c = extract_f0(Waveform(x, 24000), p)
    assert np.array_equal(c.f0_hz == 0, ~c.voiced)
    v = c.f0_hz[c.voiced]
    assert np.all((v >= p.f0_min_hz) & (v <= p.f0_max_hz))
    assert not c.voiced.all()


def test_interpolate_fully_voiced_unchanged():
    c = contour([100.0, 110.0, 120.0])
    out = interpolate_unvoiced(c)
    assert out.f0_hz.tolist() == [100.0, 110.0, 120.0]


def test_interpolate_midpoint_and_trim():
    assert interpolate_unvoiced(contour([100.0, 0.0, 200.0])).f0_hz.tolist() == [100.0, 150.0, 200.0]
    out = interpolate_unvoiced(contour([0.0, 0.0, 120.0, 120.0, 0.0]))
    assert out.f0_hz.tolist() == [120.0, 120.0]
    assert out.voiced.all()


def test_interpolate_requires_voicing():
    with pytest.raises(NoVoicedFrames):
        interpolate_unvoiced(contour([0.0, 0.0]))


def test_align_contours():
    a, b = align_contours(contour([1.0, 2.0, 3.0]), contour([4.0, 5.0, 6.0]))
    assert a.tolist() == [1.0, 2.0, 3.0] and b.tolist() == [4.0, 5.0, 6.0]
    a, b = align_contours(contour([100.0, 200.0]), contour([100.0, 150.0, 200.0]))
    assert b.tolist() == [100.0, 200.0]
    long_b = contour(np.linspace(100, 200, 20))
    a, b = align_contours(contour(np.linspace(100, 200, 10)), long_b)
    assert len(b) == 10
    np.testing.assert_allclose(b, np.linspace(100, 200, 10), atol=1e-12)
    with pytest.raises(ContourTooShort):
        align_contours(contour([100.0]), contour([100.0, 120.0]))


def test_pcc_examples():
    f = contour([100.0, 150.0, 200.0])
    assert pcc_loss(f, f) == pytest.approx(0.0, abs=1e-12)
    assert pcc_loss(f, contour([200.0, 300.0, 400.0])) == pytest.approx(0.0, abs=1e-12)
    assert pcc_loss(f, contour([200.0, 150.0, 100.0])) == pytest.approx(2.0, abs=1e-12)
    with pytest.raises(DegenerateContour):
        pcc_loss(contour([150.0, 150.0, 150.0]), f)
    with pytest.raises(DegenerateContour):
        pcc_loss(f, contour([150.0, 150.0, 150.0]))


contours = st.lists(st.floats(50.0, 500.0), min_size=3, max_size=60)


@settings(max_examples=200, deadline=None)
@given(contours, contours)
def test_pcc_range(a, b):
    try:
        v = pcc_loss(contour(a), contour(b))
    except DegenerateContour:
        return
    assert 0.0 <= v <= 2.0


@settings(max_examples=200, deadline=None)
@given(st.integers(3, 80), st.integers(0, 2**32 - 1))
def test_pcc_symmetric_on_equal_lengths(n, seed):
    rng = np.random.default_rng(seed)
    a, b = rng.uniform(80, 300, n), rng.uniform(80, 300, n)
    assert pcc_loss(contour(a), contour(b)) == pcc_loss(contour(b), contour(a))


@settings(max_examples=200, deadline=None)
@given(st.integers(3, 80), st.integers(0, 2**32 - 1))
def test_normalisation_does_not_change_r(n, seed):
    rng = np.random.default_rng(seed)
    a, b = rng.uniform(80, 300, n), rng.uniform(80, 300, n)
    assert abs(pcc_from_arrays(a, b, normalize=True) - pcc_from_arrays(a, b, normalize=False)) <= 1e-12


def test_pcc_from_waveforms_identity():
    x = chirp(120.0, 180.0)
    assert pcc_loss_waveforms(x, x) == pytest.approx(0.0, abs=1e-12)


def test_contour_csv_round_trip(tmp_path):
    c = F0Contour(np.array([0.0, 120.5, 121.25, 0.0]), np.array([False, True, True, False]), 300, 24000)
    path = tmp_path / "c.csv"
    write_contour_csv(path, c, frame_len=1200)
    lines = path.read_text().splitlines()
    assert lines[0] == "frame_index,time_s,f0_hz,voiced"
    assert lines[1] == "0,0.025,0.0,0"
    back = read_contour_csv(path)
    assert np.array_equal(back.f0_hz, c.f0_hz) and np.array_equal(back.voiced, c.voiced)
