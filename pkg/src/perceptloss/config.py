"""Evaluation configuration, read from a JSON file.

Schema (every key optional; missing keys take the defaults shown)::

    {
      "lambdas": {"spk": 0.1, "aspk": 0.5, "sty": 1.0, "cyc": 1.0,
                  "stoi": 1.0, "mse": 0.1, "mos": 1.0, "p": 1.0},
      "perceptual_loss": "stoi",            # one of stoi | pmos | pcc
      "stoi": {"seg_len_frames": 30, "num_bands": 15, "first_center_hz": 150.0,
               "resample_rate_hz": 10000, "silent_range_db": 40.0,
               "apply_clipping": false, "clip_sdr_db": -15.0, "band_term": "l1",
               "frame_len": 256, "hop": 128, "fft_size": 512},
      "f0": {"f0_min_hz": 70.0, "f0_max_hz": 400.0, "frame_len": 1200,
             "hop": 300, "voicing_threshold": 0.3},
      "mel": {"sample_rate_hz": 24000, "num_mels": 80, "frame_len": 1200,
              "hop": 300, "fmin_hz": 0.0, "fmax_hz": 12000.0, "log_floor": 1e-05},
      "scorer_weights_path": null,           # relative to the config file
      "worker_count": 1
    }
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, fields
from pathlib import Path

from .dsp import MelParams
from .errors import ConfigError
from .objective import PERCEPTUAL_LOSSES, LambdaWeights
from .pitch import F0Params
from .stoi import StoiParams


@dataclass(frozen=True)
class EvalConfig:
    lambdas: LambdaWeights = field(default_factory=LambdaWeights)
    stoi_params: StoiParams = field(default_factory=StoiParams)
    f0_params: F0Params = field(default_factory=F0Params)
    mel_params: MelParams = field(default_factory=MelParams)
    scorer_weights_path: Path | None = None
    worker_count: int = 1
    perceptual_loss: str = "stoi"

    def __post_init__(self):
        if self.worker_count < 1:
            raise ConfigError(f"worker_count must be >= 1, got {self.worker_count}")
        if self.perceptual_loss not in PERCEPTUAL_LOSSES:
            raise ConfigError(f"perceptual_loss must be one of {PERCEPTUAL_LOSSES}")


def _build(cls, section, name):
    if section is None:
        return cls()
    if not isinstance(section, dict):
        raise ConfigError(f"section {name!r} must be an object")
    known = {f.name for f in fields(cls)}
    unknown = set(section) - known
    if unknown:
        raise ConfigError(f"unknown keys in {name!r}: {sorted(unknown)}")
    try:
        return cls(**section)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad {name!r} section: {exc}") from exc


_TOP_KEYS = {"lambdas", "perceptual_loss", "stoi", "f0", "mel", "scorer_weights_path", "worker_count"}


def config_from_dict(d: dict, base_dir: Path | None = None) -> EvalConfig:
    if not isinstance(d, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(d) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    weights = d.get("scorer_weights_path")
    if weights is not None:
        weights = Path(weights)
        if base_dir is not None and not weights.is_absolute():
            weights = base_dir / weights
    try:
        workers = int(d.get("worker_count", 1))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad worker_count: {exc}") from exc
    return EvalConfig(
        lambdas=_build(LambdaWeights, d.get("lambdas"), "lambdas"),
        stoi_params=_build(StoiParams, d.get("stoi"), "stoi"),
        f0_params=_build(F0Params, d.get("f0"), "f0"),
        mel_params=_build(MelParams, d.get("mel"), "mel"),
        scorer_weights_path=weights,
        worker_count=workers,
        perceptual_loss=d.get("perceptual_loss", "stoi"),
    )


def load_config(path) -> EvalConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
        data = json.loads(text)
    except (OSError, UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return config_from_dict(data, base_dir=path.parent)
