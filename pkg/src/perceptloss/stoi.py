"""Short-time objective intelligibility score and the STOI training loss.

Two modes share one pipeline (resample, silent-frame removal, STFT,
one-third octave envelopes, sliding segments):

* loss mode (``apply_clipping=False``, the default): plain per-band
  correlation of envelope segments, no clipping, framing as in ``dsp``.
* classic mode (``apply_clipping=True``): reproduces the reference STOI
  algorithm exactly, i.e. the degraded envelopes are scale-normalised and
  clipped at ``clip_sdr_db``, band edges snap to the nearest FFT bin, and
  frame starts follow ``dsp.classic_frame_starts``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .audio import Waveform, resample
from .dsp import (
    classic_frame_starts,
    frame_signal,
    remove_silent_frames,
    stft_power,
    third_octave_envelopes,
)
from .errors import DegenerateBand, LengthMismatch, SignalTooShort


@dataclass(frozen=True)
class StoiParams:
    seg_len_frames: int = 30
    num_bands: int = 15
    first_center_hz: float = 150.0
    resample_rate_hz: int = 10000
    silent_range_db: float = 40.0
    apply_clipping: bool = False
    clip_sdr_db: float = -15.0
    band_term: str = "l1"
    frame_len: int = 256
    hop: int = 128
    fft_size: int = 512

    def __post_init__(self):
        if self.seg_len_frames < 2:
            raise ValueError("seg_len_frames must be at least 2")
        if self.num_bands < 1:
            raise ValueError("num_bands must be at least 1")
        if self.band_term not in ("l1", "l2"):
            raise ValueError(f"band_term must be 'l1' or 'l2', got {self.band_term!r}")


@dataclass
class StoiLossValue:
    total: float
    corr_term: float
    mse_term: float
    per_frame_scores: np.ndarray = field(repr=False)


def _centered_unit(v: np.ndarray):
    c = v - v.mean()
    n = np.sqrt(np.dot(c, c))
    return c, n


def band_correlations(x_seg, y_seg) -> np.ndarray:
    """Per-band correlation of two [N x J] envelope segments.

    A reference band with zero variance raises ``DegenerateBand``; a degraded
    band with zero variance contributes a correlation of 0.
    """
    x_seg = np.asarray(x_seg, dtype=np.float64)
    y_seg = np.asarray(y_seg, dtype=np.float64)
    if x_seg.shape != y_seg.shape or x_seg.ndim != 2:
        raise ValueError(f"segment shapes differ: {x_seg.shape} vs {y_seg.shape}")
    J = x_seg.shape[1]
    out = np.empty(J)
    for j in range(J):
        xc, xn = _centered_unit(x_seg[:, j])
        if xn == 0.0:
            raise DegenerateBand(f"reference band {j} is constant over the segment")
        yc, yn = _centered_unit(y_seg[:, j])
        out[j] = 0.0 if yn == 0.0 else np.dot(xc, yc) / (xn * yn)
    return np.clip(out, -1.0, 1.0)


def stoi_frame_score(x_seg, y_seg) -> float:
    """Band-averaged envelope correlation for one segment, in [-1, 1]."""
    return float(band_correlations(x_seg, y_seg).mean())


def clip_segment(x_seg, y_seg, clip_sdr_db: float) -> np.ndarray:
    """Scale ``y_seg`` per band to the energy of ``x_seg`` and clip it at ``x * (1 + 10**(-sdr/20))``."""
    x_seg = np.asarray(x_seg, dtype=np.float64)
    y_seg = np.asarray(y_seg, dtype=np.float64)
    bound = 10.0 ** (-clip_sdr_db / 20.0)
    y_energy = np.sum(y_seg ** 2, axis=0)
    alpha = np.sqrt(np.sum(x_seg ** 2, axis=0) / np.where(y_energy > 0, y_energy, 1.0))
    alpha = np.where(y_energy > 0, alpha, 1.0)
    return np.minimum(y_seg * alpha, x_seg * (1.0 + bound))


def _segments(env: np.ndarray, n: int):
    for m in range(n, env.shape[0] + 1):
        yield env[m - n:m]


def envelopes(x: Waveform, y: Waveform, p: StoiParams = StoiParams()):
    """Band envelopes [frames x J] of reference and degraded signal after silence removal."""
    if len(x) != len(y):
        raise LengthMismatch(f"{len(x)} vs {len(y)} samples")
    if x.sample_rate_hz != y.sample_rate_hz:
        raise LengthMismatch(f"sample rates differ: {x.sample_rate_hz} vs {y.sample_rate_hz}")
    x = resample(x, p.resample_rate_hz)
    y = resample(y, p.resample_rate_hz)
    classic = p.apply_clipping
    xs, ys = remove_silent_frames(x, y, p.frame_len, p.hop, p.silent_range_db, classic=classic)
    if classic:
        starts = classic_frame_starts(len(xs), p.frame_len, p.hop)
        idx = starts[:, None] + np.arange(p.frame_len)[None, :]
        xf, yf = xs.samples[idx], ys.samples[idx]
    else:
        xf = frame_signal(xs, p.frame_len, p.hop)
        yf = frame_signal(ys, p.frame_len, p.hop)
    rate = p.resample_rate_hz
    edge_rule = "nearest" if classic else "interval"
    x_env = third_octave_envelopes(stft_power(xf, p.fft_size, rate, p.hop), p.num_bands,
                                   p.first_center_hz, edge_rule)
    y_env = third_octave_envelopes(stft_power(yf, p.fft_size, rate, p.hop), p.num_bands,
                                   p.first_center_hz, edge_rule)
    if x_env.env.shape[0] < p.seg_len_frames:
        raise SignalTooShort(
            f"only {x_env.env.shape[0]} non-silent frames, need {p.seg_len_frames}"
        )
    return x_env.env, y_env.env


def segment_scores(x_env, y_env, p: StoiParams = StoiParams()) -> np.ndarray:
    """``stoi_frame_score`` for every sliding segment of ``p.seg_len_frames`` frames."""
    scores = []
    for xs, ys in zip(_segments(x_env, p.seg_len_frames), _segments(y_env, p.seg_len_frames)):
        if p.apply_clipping:
            ys = clip_segment(xs, ys, p.clip_sdr_db)
        scores.append(stoi_frame_score(xs, ys))
    return np.asarray(scores)


def stoi_score(x: Waveform, y: Waveform, p: StoiParams = StoiParams()) -> float:
    """Intelligibility of ``y`` relative to the clean reference ``x``."""
    x_env, y_env = envelopes(x, y, p)
    return float(np.mean(segment_scores(x_env, y_env, p)))


def band_discrepancy(x_seg, y_seg, band_term: str = "l1") -> float:
    """Distance between the segment-mean band envelope vectors, divided by J."""
    dx = np.mean(x_seg, axis=0) - np.mean(y_seg, axis=0)
    if band_term == "l1":
        return float(np.sum(np.abs(dx)) / dx.shape[0])
    return float(np.sum(dx ** 2) / dx.shape[0])


def stoi_loss_from_envelopes(x_env, y_env, p: StoiParams = StoiParams(),
                             lambda_stoi: float = 1.0, lambda_mse: float = 0.1) -> StoiLossValue:
    x_env = np.asarray(x_env, dtype=np.float64)
    y_env = np.asarray(y_env, dtype=np.float64)
    if x_env.shape != y_env.shape:
        raise LengthMismatch(f"envelope shapes differ: {x_env.shape} vs {y_env.shape}")
    if x_env.shape[0] < p.seg_len_frames:
        raise SignalTooShort(f"only {x_env.shape[0]} frames, need {p.seg_len_frames}")
    scores = segment_scores(x_env, y_env, p)
    band = np.asarray([
        band_discrepancy(xs, ys, p.band_term)
        for xs, ys in zip(_segments(x_env, p.seg_len_frames), _segments(y_env, p.seg_len_frames))
    ])
    corr = 1.0 - scores
    per_segment = lambda_stoi * corr + lambda_mse * band
    return StoiLossValue(
        total=float(np.mean(per_segment)),
        corr_term=float(np.mean(corr)),
        mse_term=float(np.mean(band)),
        per_frame_scores=scores,
    )


def stoi_loss(x: Waveform, y: Waveform, p: StoiParams = StoiParams(),
              lambda_stoi: float = 1.0, lambda_mse: float = 0.1) -> StoiLossValue:
    """Segment-averaged ``lambda_stoi * (1 - score) + lambda_mse * band discrepancy``."""
    x_env, y_env = envelopes(x, y, p)
    return stoi_loss_from_envelopes(x_env, y_env, p, lambda_stoi, lambda_mse)
