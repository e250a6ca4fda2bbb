"""F0 contours and the pitch correlation coefficient (PCC) loss.

The default tracker is a normalised autocorrelation peak picker. Anything
callable as ``tracker(waveform, params) -> F0Contour`` can replace it in
``pcc_loss_waveforms``.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from .audio import Waveform
from .dsp import frame_signal, num_frames
from .errors import ContourTooShort, DegenerateContour, NoVoicedFrames, SignalTooShort

# a later local peak wins over an earlier one only if it is this much higher;
# stops period multiples from reporting a sub-octave
OCTAVE_MARGIN = 0.02


@dataclass(frozen=True)
class F0Params:
    f0_min_hz: float = 70.0
    f0_max_hz: float = 400.0
    frame_len: int = 1200
    hop: int = 300
    voicing_threshold: float = 0.3

    def __post_init__(self):
        if not 0 < self.f0_min_hz < self.f0_max_hz:
            raise ValueError(f"need 0 < f0_min < f0_max, got {self.f0_min_hz}, {self.f0_max_hz}")
        if not 0 < self.voicing_threshold < 1:
            raise ValueError("voicing_threshold must lie in (0, 1)")
        if not self.frame_len >= self.hop >= 1:
            raise ValueError("need frame_len >= hop >= 1")


@dataclass(frozen=True, eq=False)
class F0Contour:
    f0_hz: np.ndarray
    voiced: np.ndarray
    hop: int
    sample_rate_hz: int

    def __len__(self):
        return self.f0_hz.shape[0]

    @classmethod
    def from_hz(cls, values, hop: int = 300, sample_rate_hz: int = 24000) -> "F0Contour":
        """Contour from raw values; zeros are read as unvoiced frames."""
        f0 = np.asarray(values, dtype=np.float64)
        return cls(f0, f0 > 0, hop, sample_rate_hz)

    def times_s(self, frame_len: int = 0) -> np.ndarray:
        return (np.arange(len(self)) * self.hop + frame_len / 2) / self.sample_rate_hz


def _nccf(frame: np.ndarray, max_lag: int) -> np.ndarray:
    """Normalised cross-correlation of a frame with its own lagged copy, lags 0..max_lag."""
    n = frame.shape[0]
    size = 1 << int(np.ceil(np.log2(2 * n)))
    spec = np.fft.rfft(frame, size)
    acf = np.fft.irfft(spec * np.conj(spec), size)[: max_lag + 1]
    sq = np.concatenate([[0.0], np.cumsum(frame ** 2)])
    lags = np.arange(max_lag + 1)
    head = sq[n - lags]            # energy of frame[: n - lag]
    tail = sq[n] - sq[lags]        # energy of frame[lag:]
    denom = np.sqrt(head * tail)
    out = np.zeros(max_lag + 1)
    ok = denom > 1e-12 * max(sq[n], 1e-300)
    out[ok] = acf[ok] / denom[ok]
    return out


def _pick_lag(r: np.ndarray, lag_min: int, lag_max: int):
    """Best local maximum of ``r`` in [lag_min, lag_max]; returns (lag, value) or None."""
    best = None
    for lag in range(max(lag_min, 1), lag_max + 1):
        v = r[lag]
        if v >= r[lag - 1] and v >= r[lag + 1]:
            if best is None or v > best[1] + OCTAVE_MARGIN:
                best = (lag, v)
    return best


def extract_f0(w: Waveform, p: F0Params = F0Params()) -> F0Contour:
    """Frame-wise F0 by normalised autocorrelation with parabolic lag refinement."""
    rate = w.sample_rate_hz
    if p.f0_max_hz >= rate / 2:
        raise ValueError(f"f0_max {p.f0_max_hz} Hz is not below Nyquist")
    if num_frames(len(w), p.frame_len, p.hop) < 2:
        raise SignalTooShort(f"{len(w)} samples gives fewer than 2 pitch frames")
    lag_min = int(np.floor(rate / p.f0_max_hz))
    lag_max = int(np.ceil(rate / p.f0_min_hz))
    if lag_max + 1 >= p.frame_len:
        raise ValueError(f"frame_len {p.frame_len} too short for f0_min {p.f0_min_hz} Hz")

    frames = frame_signal(w, p.frame_len, p.hop)
    f0 = np.zeros(frames.shape[0])
    voiced = np.zeros(frames.shape[0], dtype=bool)
    for i, frame in enumerate(frames):
        frame = frame - frame.mean()
        r = _nccf(frame, lag_max + 1)
        pick = _pick_lag(r, lag_min, lag_max)
        if pick is None or pick[1] < p.voicing_threshold:
            continue
        lag, _ = pick
        a, b, c = r[lag - 1], r[lag], r[lag + 1]
        curv = a - 2 * b + c
        shift = 0.5 * (a - c) / curv if curv < 0 else 0.0
        f0[i] = np.clip(rate / (lag + shift), p.f0_min_hz, p.f0_max_hz)
        voiced[i] = True
    if not voiced.any():
        raise NoVoicedFrames("no frame passed the voicing threshold")
    return F0Contour(f0, voiced, p.hop, rate)


def interpolate_unvoiced(c: F0Contour) -> F0Contour:
    """Fill interior unvoiced gaps linearly and trim unvoiced edges."""
    voiced_idx = np.flatnonzero(c.voiced)
    if voiced_idx.size == 0:
        raise NoVoicedFrames("contour has no voiced frames")
    first, last = voiced_idx[0], voiced_idx[-1]
    frames = np.arange(first, last + 1)
    f0 = np.interp(frames, voiced_idx, c.f0_hz[voiced_idx])
    # keep voiced values bit-exact
    f0[voiced_idx - first] = c.f0_hz[voiced_idx]
    return F0Contour(f0, np.ones(f0.shape[0], dtype=bool), c.hop, c.sample_rate_hz)


def align_contours(a: F0Contour, b: F0Contour):
    """Linearly resample ``b`` onto ``a``'s frame grid; returns two equal-length arrays."""
    fa = np.asarray(a.f0_hz if isinstance(a, F0Contour) else a, dtype=np.float64)
    fb = np.asarray(b.f0_hz if isinstance(b, F0Contour) else b, dtype=np.float64)
    if fa.shape[0] < 2 or fb.shape[0] < 2:
        raise ContourTooShort(f"contour lengths {fa.shape[0]} and {fb.shape[0]}; need >= 2")
    if fa.shape[0] == fb.shape[0]:
        return fa.copy(), fb.copy()
    grid = np.linspace(0.0, fb.shape[0] - 1, fa.shape[0])
    return fa.copy(), np.interp(grid, np.arange(fb.shape[0]), fb)


def pearson(a, b) -> float:
    """Two-pass Pearson correlation, clipped to [-1, 1]."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    ac = a - a.mean()
    bc = b - b.mean()
    denom = np.sqrt(np.dot(ac, ac) * np.dot(bc, bc))
    if denom == 0.0:
        raise DegenerateContour("zero variance; Pearson correlation is undefined")
    return float(np.clip(np.dot(ac, bc) / denom, -1.0, 1.0))


def pcc_from_arrays(fa, fb, normalize: bool = True) -> float:
    """``1 - Pearson`` of two aligned contours, each optionally L1-normalised first."""
    fa = np.asarray(fa, dtype=np.float64)
    fb = np.asarray(fb, dtype=np.float64)
    for v in (fa, fb):
        if np.ptp(v) <= 1e-12 * np.max(np.abs(v)):
            raise DegenerateContour("contour is constant")
    if normalize:
        fa = fa / np.sum(np.abs(fa))
        fb = fb / np.sum(np.abs(fb))
    return 1.0 - pearson(fa, fb)


def pcc_loss(a: F0Contour, b: F0Contour) -> float:
    """PCC loss between source contour ``a`` and converted contour ``b``, in [0, 2]."""
    a = interpolate_unvoiced(a)
    b = interpolate_unvoiced(b)
    fa, fb = align_contours(a, b)
    return pcc_from_arrays(fa, fb)


def pcc_loss_waveforms(x: Waveform, y: Waveform, p: F0Params = F0Params(),
                       tracker: Callable[[Waveform, F0Params], F0Contour] = extract_f0) -> float:
    return pcc_loss(tracker(x, p), tracker(y, p))


def write_contour_csv(path, c: F0Contour, frame_len: int = 0) -> None:
    """Dump a contour as ``frame_index,time_s,f0_hz,voiced`` rows."""
    path = Path(path)
    times = c.times_s(frame_len)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["frame_index", "time_s", "f0_hz", "voiced"])
        for i in range(len(c)):
            writer.writerow([i, repr(float(times[i])), repr(float(c.f0_hz[i])), int(bool(c.voiced[i]))])


def read_contour_csv(path, hop: int = 300, sample_rate_hz: int = 24000) -> F0Contour:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    f0 = np.array([float(r["f0_hz"]) for r in rows])
    voiced = np.array([r["voiced"] == "1" for r in rows], dtype=bool)
    return F0Contour(f0, voiced, hop, sample_rate_hz)
