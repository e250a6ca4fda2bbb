"""Spectral front end shared by the STOI, pitch and MOS modules.

Conventions
-----------
* Frames never zero-pad the signal: a signal of length ``n`` yields
  ``(n - frame_len) // hop + 1`` frames.
* The Hann window is the symmetric variant without zero end points,
  ``hann(n) == np.hanning(n + 2)[1:-1]``.
* ``stft_power`` stores the unnormalised ``|DFT|**2`` for bins
  ``0 .. fft_size // 2``. Total energy is recovered with the one-sided
  convention: bins ``1 .. fft_size/2 - 1`` count twice, DC and Nyquist
  once, and the sum is divided by ``fft_size`` (see ``spectral_energy``).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .audio import Waveform
from .errors import AllFramesSilent, BandAboveNyquist, LengthMismatch, SignalTooShort


def hann(n: int) -> np.ndarray:
    return np.hanning(n + 2)[1:-1]


def num_frames(length: int, frame_len: int, hop: int) -> int:
    if length < frame_len:
        return 0
    return (length - frame_len) // hop + 1


def frame_signal(w, frame_len: int, hop: int) -> np.ndarray:
    """Split a waveform (or 1-D array) into overlapping frames, shape [frames, frame_len]."""
    x = w.samples if isinstance(w, Waveform) else np.asarray(w, dtype=np.float64)
    if not frame_len >= hop >= 1:
        raise ValueError(f"need frame_len >= hop >= 1, got frame_len={frame_len}, hop={hop}")
    if x.shape[0] < frame_len:
        raise SignalTooShort(f"{x.shape[0]} samples is shorter than one frame ({frame_len})")
    count = num_frames(x.shape[0], frame_len, hop)
    view = np.lib.stride_tricks.sliding_window_view(x, frame_len)[::hop]
    return view[:count].copy()


@dataclass(frozen=True, eq=False)
class PowerSpectrogram:
    frames: np.ndarray  # [num_frames, fft_size // 2 + 1]
    frame_len: int
    hop: int
    sample_rate_hz: int
    fft_size: int

    @property
    def bin_freqs_hz(self) -> np.ndarray:
        return np.arange(self.frames.shape[1]) * self.sample_rate_hz / self.fft_size


def _window(name_or_array, n: int) -> np.ndarray:
    if isinstance(name_or_array, str):
        if name_or_array == "hann":
            return hann(n)
        if name_or_array in ("rect", "rectangular", "none"):
            return np.ones(n)
        raise ValueError(f"unknown window {name_or_array!r}")
    win = np.asarray(name_or_array, dtype=np.float64)
    if win.shape != (n,):
        raise ValueError(f"window length {win.shape} does not match frame length {n}")
    return win


def stft_power(frames, fft_size: int, sample_rate_hz: int, hop: int, window="hann") -> PowerSpectrogram:
    frames = np.atleast_2d(np.asarray(frames, dtype=np.float64))
    frame_len = frames.shape[1]
    if fft_size < frame_len:
        raise ValueError(f"fft_size {fft_size} is smaller than frame length {frame_len}")
    spec = np.fft.rfft(frames * _window(window, frame_len), n=fft_size, axis=1)
    power = spec.real ** 2 + spec.imag ** 2
    return PowerSpectrogram(power, frame_len, hop, int(sample_rate_hz), fft_size)


def spectral_energy(ps: PowerSpectrogram) -> np.ndarray:
    """Per-frame time-domain energy implied by a one-sided power spectrum."""
    p = ps.frames
    weights = np.full(p.shape[1], 2.0)
    weights[0] = 1.0
    if ps.fft_size % 2 == 0:
        weights[-1] = 1.0
    return p @ weights / ps.fft_size


@dataclass(frozen=True)
class MelParams:
    sample_rate_hz: int = 24000
    num_mels: int = 80
    frame_len: int = 1200
    hop: int = 300
    fmin_hz: float = 0.0
    fmax_hz: float = 12000.0
    log_floor: float = 1e-5

    def __post_init__(self):
        if self.num_mels < 1:
            raise ValueError("num_mels must be positive")
        if not 0 <= self.fmin_hz < self.fmax_hz <= self.sample_rate_hz / 2:
            raise ValueError(
                f"need 0 <= fmin < fmax <= Nyquist, got {self.fmin_hz}, {self.fmax_hz}"
            )
        if self.log_floor <= 0:
            raise ValueError("log_floor must be positive")
        if not self.frame_len >= self.hop >= 1:
            raise ValueError("need frame_len >= hop >= 1")


@dataclass(frozen=True, eq=False)
class MelSpectrogram:
    frames: np.ndarray  # [num_frames, num_mels], natural-log power
    mel_params: MelParams

    @property
    def num_frames(self) -> int:
        return self.frames.shape[0]


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(p: MelParams, fft_size: int) -> np.ndarray:
    """Unit-peak triangular filters on the HTK mel scale, shape [num_mels, fft_size//2 + 1]."""
    freqs = np.arange(fft_size // 2 + 1) * p.sample_rate_hz / fft_size
    edges = mel_to_hz(np.linspace(hz_to_mel(p.fmin_hz), hz_to_mel(p.fmax_hz), p.num_mels + 2))
    lo, center, hi = edges[:-2, None], edges[1:-1, None], edges[2:, None]
    rising = (freqs[None, :] - lo) / (center - lo)
    falling = (hi - freqs[None, :]) / (hi - center)
    return np.clip(np.minimum(rising, falling), 0.0, None)


def mel_spectrogram(w: Waveform, p: MelParams = MelParams()) -> MelSpectrogram:
    """Log-mel spectrogram, ``log(max(mel_power, log_floor))``; FFT size equals frame length."""
    if w.sample_rate_hz != p.sample_rate_hz:
        raise ValueError(
            f"waveform is at {w.sample_rate_hz} Hz but mel params assume {p.sample_rate_hz} Hz"
        )
    frames = frame_signal(w, p.frame_len, p.hop)
    ps = stft_power(frames, p.frame_len, p.sample_rate_hz, p.hop)
    mel_power = ps.frames @ mel_filterbank(p, p.frame_len).T
    return MelSpectrogram(np.log(np.maximum(mel_power, p.log_floor)), p)


@dataclass(frozen=True, eq=False)
class BandEnvelopes:
    env: np.ndarray  # [num_frames, J]
    band_centers_hz: np.ndarray

    @property
    def num_bands(self) -> int:
        return self.band_centers_hz.shape[0]


def third_octave_matrix(sample_rate_hz: int, fft_size: int, num_bands: int = 15,
                        first_center_hz: float = 150.0, edge_rule: str = "interval"):
    """Band membership matrix [J, fft_size//2 + 1] and centre frequencies.

    ``edge_rule="interval"`` puts a bin in band j when its frequency lies in
    ``[fc * 2**(-1/6), fc * 2**(1/6))``. ``edge_rule="nearest"`` snaps each edge
    to the closest bin and takes bins from the lower snapped edge up to (not
    including) the upper one, which is how the classic STOI reference does it.
    """
    n_bins = fft_size // 2 + 1
    freqs = np.arange(n_bins) * sample_rate_hz / fft_size
    centers = first_center_hz * 2.0 ** (np.arange(num_bands) / 3.0)
    lo_edges = centers * 2.0 ** (-1.0 / 6.0)
    hi_edges = centers * 2.0 ** (1.0 / 6.0)
    nyquist = sample_rate_hz / 2.0
    if hi_edges[-1] > nyquist:
        raise BandAboveNyquist(
            f"top band edge {hi_edges[-1]:.1f} Hz exceeds Nyquist {nyquist:.1f} Hz"
        )
    A = np.zeros((num_bands, n_bins))
    for j in range(num_bands):
        if edge_rule == "interval":
            A[j, (freqs >= lo_edges[j]) & (freqs < hi_edges[j])] = 1.0
        elif edge_rule == "nearest":
            lo_i = int(np.argmin((freqs - lo_edges[j]) ** 2))
            hi_i = int(np.argmin((freqs - hi_edges[j]) ** 2))
            A[j, lo_i:hi_i] = 1.0
        else:
            raise ValueError(f"unknown edge rule {edge_rule!r}")
    return A, centers


def third_octave_envelopes(ps: PowerSpectrogram, num_bands: int = 15,
                           first_center_hz: float = 150.0, edge_rule: str = "interval") -> BandEnvelopes:
    """Short-term band envelopes: sqrt of summed bin power per one-third octave band."""
    A, centers = third_octave_matrix(ps.sample_rate_hz, ps.fft_size, num_bands,
                                     first_center_hz, edge_rule)
    return BandEnvelopes(np.sqrt(ps.frames @ A.T), centers)


def classic_frame_starts(length: int, frame_len: int, hop: int) -> np.ndarray:
    """Frame starts used by the classic STOI reference: ``range(0, length - frame_len, hop)``.

    Differs from ``frame_signal`` only when ``length - frame_len`` is a multiple of
    ``hop``, in which case the last frame is dropped.
    """
    return np.arange(0, length - frame_len, hop)


def remove_silent_frames(x: Waveform, y: Waveform, frame_len: int = 256, hop: int = 128,
                         range_db: float = 40.0, classic: bool = False):
    """Drop frames where ``x`` is more than ``range_db`` below its loudest frame.

    The same frames are dropped from ``y``. Surviving Hann-windowed frames are
    overlap-added back together, giving ``(kept - 1) * hop + frame_len`` samples.
    """
    if len(x) != len(y):
        raise LengthMismatch(f"{len(x)} vs {len(y)} samples")
    if len(x) < frame_len:
        raise SignalTooShort(f"{len(x)} samples is shorter than one frame ({frame_len})")
    if classic:
        starts = classic_frame_starts(len(x), frame_len, hop)
        if starts.size == 0:
            raise SignalTooShort(f"{len(x)} samples leaves no classic frame")
    else:
        starts = np.arange(num_frames(len(x), frame_len, hop)) * hop
    win = hann(frame_len)
    idx = starts[:, None] + np.arange(frame_len)[None, :]
    xf = x.samples[idx] * win
    yf = y.samples[idx] * win
    norms = np.linalg.norm(xf, axis=1)
    if not np.any(norms > 0):
        raise AllFramesSilent("reference signal has no energy")
    with np.errstate(divide="ignore"):
        energy_db = 20.0 * np.log10(norms)
    keep = energy_db > energy_db.max() - range_db
    kept = int(keep.sum())
    out_len = (kept - 1) * hop + frame_len
    x_out = np.zeros(out_len)
    y_out = np.zeros(out_len)
    # fixed left-to-right accumulation
    for k, frame_idx in enumerate(np.flatnonzero(keep)):
        s = k * hop
        x_out[s:s + frame_len] += xf[frame_idx]
        y_out[s:s + frame_len] += yf[frame_idx]
    return Waveform(x_out, x.sample_rate_hz), Waveform(y_out, y.sample_rate_hz)
