import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from perceptloss import MelParams, Waveform, frame_signal, mel_spectrogram, stft_power
from perceptloss.dsp import (
    PowerSpectrogram,
    hann,
    remove_silent_frames,
    spectral_energy,
    third_octave_envelopes,
    third_octave_matrix,
)
from perceptloss.errors import AllFramesSilent, BandAboveNyquist, SignalTooShort

from signals import tone


@pytest.mark.parametrize("length,frame,hop,expected", [(512, 256, 128, 3), (256, 256, 128, 1),
                                                        (700, 256, 128, 4)])
def test_frame_counts(length, frame, hop, expected):
    frames = frame_signal(np.arange(length, dtype=float), frame, hop)
    assert frames.shape == (expected, frame)
    assert frames[-1, 0] == (expected - 1) * hop


def test_frame_too_short():
    with pytest.raises(SignalTooShort):
        frame_signal(np.zeros(255), 256, 128)


def test_stft_zero_frame():
    ps = stft_power(np.zeros((1, 256)), 512, 10000, 128)
    assert ps.frames.shape == (1, 257)
    assert np.all(ps.frames == 0.0)


def test_stft_impulse_is_flat():
    frame = np.zeros(256)
    frame[0] = 1.0
    ps = stft_power(frame[None, :], 512, 10000, 128, window="rect")
    np.testing.assert_allclose(ps.frames[0], 1.0, rtol=0, atol=1e-15)


def test_stft_sine_bin():
    x = np.sin(2 * np.pi * 1000 * np.arange(512) / 10000)
    ps = stft_power(x[None, :], 512, 10000, 512)
    # analytic bin = f * N / fs = 51.2
    assert abs(int(np.argmax(ps.frames[0])) - 51) <= 1


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from([(256, 512), (200, 256), (1200, 1200), (255, 511)]))
def test_parseval_one_sided(seed, sizes):
    frame_len, fft_size = sizes
    x = np.random.default_rng(seed).standard_normal(frame_len)
    ps = stft_power(x[None, :], fft_size, 10000, frame_len)
    energy = np.sum((x * hann(frame_len)) ** 2)
    np.testing.assert_allclose(spectral_energy(ps)[0], energy, rtol=1e-6)


def test_mel_silence_hits_floor():
    p = MelParams()
    m = mel_spectrogram(Waveform(np.zeros(24000), 24000), p)
    assert np.all(m.frames == np.log(p.log_floor))


def test_mel_two_seconds_frame_count_and_width():
    m = mel_spectrogram(tone(300, seconds=2.0), MelParams())
    # floor((48000 - 1200) / 300) + 1
    assert m.frames.shape == (157, 80)
    assert np.all(np.isfinite(m.frames))


def test_mel_time_reversal():
    p = MelParams(sample_rate_hz=16000, num_mels=40, frame_len=400, hop=100, fmax_hz=8000)
    rng = np.random.default_rng(3)
    x = 0.3 * rng.standard_normal(400 + 100 * 37)  # framing covers the signal exactly
    fwd = mel_spectrogram(Waveform(x, 16000), p).frames
    rev = mel_spectrogram(Waveform(x[::-1], 16000), p).frames
    np.testing.assert_allclose(rev, fwd[::-1], rtol=0, atol=1e-9)


def test_mel_rate_must_match():
    with pytest.raises(ValueError):
        mel_spectrogram(tone(300, rate=16000), MelParams())


def test_third_octave_top_band_closed_form():
    _, centers = third_octave_matrix(10000, 512, 15, 150.0)
    assert centers[-1] == pytest.approx(150 * 2 ** (14 / 3))
    assert centers[-1] == pytest.approx(3810, abs=1)
    top_edge = centers[-1] * 2 ** (1 / 6)
    assert top_edge == pytest.approx(4277, abs=1) and top_edge < 4300


def test_third_octave_membership_brute_force():
    A, centers = third_octave_matrix(10000, 512, 15, 150.0)
    for j, fc in enumerate(centers):
        for k in range(257):
            f = k * 10000 / 512
            inside = fc * 2 ** (-1 / 6) <= f < fc * 2 ** (1 / 6)
            assert A[j, k] == (1.0 if inside else 0.0)


def test_third_octave_above_nyquist():
    with pytest.raises(BandAboveNyquist):
        third_octave_matrix(8000, 512, 15, 150.0)


def test_envelopes_zero_spectrum():
    ps = PowerSpectrogram(np.zeros((4, 257)), 256, 128, 10000, 512)
    env = third_octave_envelopes(ps)
    assert env.env.shape == (4, 15) and np.all(env.env == 0.0)
    assert env.num_bands == len(env.band_centers_hz) == 15


def test_tone_at_band_centre_stays_in_band():
    # put a single spectral line exactly on the bin nearest band 6's centre
    A, centers = third_octave_matrix(10000, 512, 15, 150.0)
    k = int(round(centers[6] * 512 / 10000))
    frames = np.zeros((1, 257))
    frames[0, k] = 4.0
    env = third_octave_envelopes(PowerSpectrogram(frames, 256, 128, 10000, 512))
    expected = np.zeros(15)
    expected[6] = 2.0
    assert env.env[0].tolist() == expected.tolist()


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.01, 100.0))
def test_envelopes_scale_with_sqrt_power(seed, alpha):
    P = np.random.default_rng(seed).uniform(0, 3, size=(5, 257))
    base = third_octave_envelopes(PowerSpectrogram(P, 256, 128, 10000, 512)).env
    scaled = third_octave_envelopes(PowerSpectrogram(alpha * P, 256, 128, 10000, 512)).env
    np.testing.assert_allclose(scaled, np.sqrt(alpha) * base, rtol=1e-12)


def test_silent_removal_keeps_loud_signal():
    x = tone(500, seconds=0.5, rate=10000)
    y = tone(700, seconds=0.5, rate=10000)
    xs, ys = remove_silent_frames(x, y)
    n_frames = (5000 - 256) // 128 + 1
    assert len(xs) == len(ys) == (n_frames - 1) * 128 + 256


def test_silent_removal_all_zero():
    z = Waveform(np.zeros(5000), 10000)
    with pytest.raises(AllFramesSilent):
        remove_silent_frames(z, tone(500, seconds=0.5, rate=10000))


def test_silent_removal_half_silence():
    x = tone(500, seconds=1.0, rate=10000).samples.copy()
    x[5000:] = 0.0
    w = Waveform(x, 10000)
    xs, ys = remove_silent_frames(w, w)
    # frame-energy oracle: windowed frame energy within 40 dB of the loudest frame
    win = np.hanning(258)[1:-1]
    energies = [np.sum((x[s:s + 256] * win) ** 2) for s in range(0, 10000 - 255, 128)]
    kept = sum(e > max(energies) * 10 ** (-40 / 10) for e in energies)
    assert len(xs) == (kept - 1) * 128 + 256
    assert abs(len(xs) - 5000) <= 256
