"""WAV input/output, resampling and evaluation manifests."""
from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np
from scipy.io import wavfile

from .errors import (
    CorruptFile,
    DuplicatePairId,
    EmptyAudio,
    EmptyManifest,
    MissingColumn,
    RateTooLow,
    UnsupportedEncoding,
)

MIN_RATE_HZ = 4000
TAPS_PER_PHASE = 64
KAISER_BETA = 8.6
# cutoff as a fraction of the lower Nyquist frequency
ROLLOFF = 0.95

MANIFEST_COLUMNS = ("pair_id", "source_path", "converted_path")


@dataclass(frozen=True, eq=False)
class Waveform:
    """Mono audio: float64 samples in [-1, 1] plus a sample rate."""

    samples: np.ndarray
    sample_rate_hz: int

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise ValueError(f"expected 1-D samples, got shape {samples.shape}")
        if not np.all(np.isfinite(samples)):
            raise ValueError("waveform contains non-finite samples")
        if int(self.sample_rate_hz) <= 0:
            raise ValueError(f"sample rate must be positive, got {self.sample_rate_hz}")
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "sample_rate_hz", int(self.sample_rate_hz))

    def __len__(self):
        return self.samples.shape[0]

    @property
    def duration_s(self) -> float:
        return len(self) / self.sample_rate_hz


def load_wav(path) -> Waveform:
    """Read a PCM16 or float32 WAV file, downmixing stereo to mono.

    16-bit samples are scaled by 1/32768, so -32768 maps to exactly -1.0.
    Float files are clipped to [-1, 1].
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such file: {path}")
    with warnings.catch_warnings():
        # scipy only warns on truncated data chunks
        warnings.simplefilter("error", wavfile.WavFileWarning)
        try:
            rate, data = wavfile.read(path)
        except wavfile.WavFileWarning as exc:
            raise CorruptFile(f"{path}: {exc}") from exc
        except (ValueError, EOFError, OSError) as exc:
            raise CorruptFile(f"{path}: {exc}") from exc

    if data.dtype == np.int16:
        samples = data.astype(np.float64) / 32768.0
    elif data.dtype == np.float32:
        if not np.all(np.isfinite(data)):
            raise CorruptFile(f"{path}: non-finite float samples")
        samples = np.clip(data.astype(np.float64), -1.0, 1.0)
    else:
        raise UnsupportedEncoding(f"{path}: sample type {data.dtype} (need PCM16 or float32)")

    if samples.ndim == 2:
        if samples.shape[1] == 1:
            samples = samples[:, 0]
        elif samples.shape[1] == 2:
            samples = 0.5 * (samples[:, 0] + samples[:, 1])
        else:
            raise UnsupportedEncoding(f"{path}: {samples.shape[1]} channels (need 1 or 2)")
    if samples.shape[0] == 0:
        raise EmptyAudio(f"{path}: no samples")
    return Waveform(samples, int(rate))


def write_wav(path, w: Waveform, encoding: str = "float32") -> None:
    """Write a mono WAV file as ``float32`` or ``pcm16``."""
    if encoding == "float32":
        data = w.samples.astype(np.float32)
    elif encoding == "pcm16":
        data = np.clip(np.round(w.samples * 32768.0), -32768, 32767).astype(np.int16)
    else:
        raise UnsupportedEncoding(f"cannot write encoding {encoding!r}")
    wavfile.write(Path(path), w.sample_rate_hz, data)


@lru_cache(maxsize=32)
def _phase_table(up: int, down: int) -> np.ndarray:
    """Kaiser-windowed sinc taps, one row of TAPS_PER_PHASE taps per output phase."""
    half = TAPS_PER_PHASE // 2
    offsets = np.arange(-half + 1, half + 1, dtype=np.float64)
    frac = np.arange(up, dtype=np.float64)[:, None] / up
    d = offsets[None, :] - frac
    cutoff = ROLLOFF * min(1.0, up / down)
    window = np.i0(KAISER_BETA * np.sqrt(np.clip(1.0 - (d / half) ** 2, 0.0, None)))
    taps = cutoff * np.sinc(cutoff * d) * window / np.i0(KAISER_BETA)
    return taps / taps.sum(axis=1, keepdims=True)


def resample(w: Waveform, target_rate_hz: int) -> Waveform:
    """Polyphase windowed-sinc resampling to ``target_rate_hz``.

    Output length is ``round(len(w) * target / source)``. Equal rates return
    the input untouched.
    """
    target_rate_hz = int(target_rate_hz)
    if target_rate_hz < MIN_RATE_HZ:
        raise RateTooLow(f"target rate {target_rate_hz} Hz is below {MIN_RATE_HZ} Hz")
    src = w.sample_rate_hz
    if target_rate_hz == src:
        return w

    g = math.gcd(src, target_rate_hz)
    up, down = target_rate_hz // g, src // g
    n_in = len(w)
    # round half up, in integers
    n_out = (2 * n_in * target_rate_hz + src) // (2 * src)
    table = _phase_table(up, down)

    half = TAPS_PER_PHASE // 2
    pad_left = half
    padded = np.concatenate([np.zeros(pad_left), w.samples, np.zeros(half + 2)])
    offsets = np.arange(-half + 1, half + 1)
    out = np.empty(n_out)
    block = 16384
    for start in range(0, n_out, block):
        n = np.arange(start, min(start + block, n_out), dtype=np.int64)
        pos = n * down
        base = pos // up
        phase = pos % up
        idx = base[:, None] + offsets[None, :] + pad_left
        out[start:start + n.size] = np.einsum("ij,ij->i", padded[idx], table[phase])
    return Waveform(np.clip(out, -1.0, 1.0), target_rate_hz)


@dataclass(frozen=True)
class PairEntry:
    pair_id: str
    source_path: Path
    converted_path: Path


def parse_manifest(path) -> list[PairEntry]:
    """Read a ``pair_id,source_path,converted_path`` CSV.

    Relative paths are resolved against the manifest's directory.
    """
    path = Path(path)
    base = path.parent
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        for col in MANIFEST_COLUMNS:
            if col not in header:
                raise MissingColumn(col)
        entries = []
        seen = set()
        for row in reader:
            pair_id = row["pair_id"].strip()
            if pair_id in seen:
                raise DuplicatePairId(pair_id)
            seen.add(pair_id)
            entries.append(
                PairEntry(
                    pair_id,
                    base / row["source_path"].strip(),
                    base / row["converted_path"].strip(),
                )
            )
    if not entries:
        raise EmptyManifest(str(path))
    return entries
