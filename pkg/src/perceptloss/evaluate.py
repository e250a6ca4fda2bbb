"""Per-pair evaluation and corpus summaries."""
from __future__ import annotations

import csv
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial
from pathlib import Path

import numpy as np

from .audio import PairEntry, load_wav, resample
from .config import EvalConfig
from .dsp import mel_spectrogram
from .errors import error_code
from .mos import Scorer, load_scorer, mos_loss_from_scores, score_utterance
from .pitch import F0Contour, extract_f0, pcc_loss, write_contour_csv
from .stoi import envelopes, segment_scores, stoi_loss_from_envelopes

log = logging.getLogger(__name__)

# report attribute -> pairs.csv column
COLUMNS = {
    "stoi_score": "stoi_score",
    "stoi_loss_total": "stoi_loss",
    "pcc_loss": "pcc_loss",
    "pmos_source": "pmos_src",
    "pmos_converted": "pmos_cnv",
    "mos_loss": "mos_loss",
}
CORE_METRICS = ("stoi_score", "stoi_loss", "pcc_loss")
MOS_METRICS = ("pmos_src", "pmos_cnv", "mos_loss")
CSV_HEADER = ["pair_id", *COLUMNS.values(), "error"]


@dataclass
class PairReport:
    pair_id: str
    stoi_score: float | None = None
    stoi_loss_total: float | None = None
    pcc_loss: float | None = None
    pmos_source: float | None = None
    pmos_converted: float | None = None
    mos_loss: float | None = None
    error: str | None = None
    contours: tuple[F0Contour, F0Contour] | None = field(default=None, repr=False, compare=False)

    def metric(self, column: str) -> float | None:
        for attr, col in COLUMNS.items():
            if col == column:
                return getattr(self, attr)
        raise KeyError(column)

    @property
    def succeeded(self) -> bool:
        return any(getattr(self, attr) is not None for attr in COLUMNS)


@dataclass
class MetricSummary:
    mean: float | None
    std: float | None
    count: int
    failures: int


@dataclass
class SummaryReport:
    metrics: dict  # column name -> MetricSummary

    def to_dict(self) -> dict:
        return {
            name: {"mean": s.mean, "std": s.std, "count": s.count, "failures": s.failures}
            for name, s in self.metrics.items()
        }


def _describe(metric: str, exc: BaseException) -> str:
    return f"{metric}: {error_code(exc)}: {exc}"


def evaluate_pair(e: PairEntry, cfg: EvalConfig, scorer: Scorer | None = None,
                  keep_contours: bool = False) -> PairReport:
    """Compute every configured metric for one pair; failures land in ``report.error``.

    STOI runs on the waveforms as loaded (it resamples internally). Pitch and
    mel features use both waveforms resampled to ``cfg.mel_params.sample_rate_hz``.
    """
    report = PairReport(e.pair_id)
    if scorer is None and cfg.scorer_weights_path is not None:
        scorer = load_scorer(cfg.scorer_weights_path)
    try:
        x = load_wav(e.source_path)
        y = load_wav(e.converted_path)
    except Exception as exc:
        report.error = _describe("load", exc)
        return report

    errors = []
    lam = cfg.lambdas
    try:
        x_env, y_env = envelopes(x, y, cfg.stoi_params)
        report.stoi_score = float(np.mean(segment_scores(x_env, y_env, cfg.stoi_params)))
        report.stoi_loss_total = stoi_loss_from_envelopes(
            x_env, y_env, cfg.stoi_params, lam.stoi, lam.mse).total
    except Exception as exc:
        errors.append(_describe("stoi", exc))

    rate = cfg.mel_params.sample_rate_hz
    try:
        xr, yr = resample(x, rate), resample(y, rate)
    except Exception as exc:
        errors.append(_describe("resample", exc))
        report.error = "; ".join(errors)
        return report

    try:
        cx, cy = extract_f0(xr, cfg.f0_params), extract_f0(yr, cfg.f0_params)
        if keep_contours:
            report.contours = (cx, cy)
        report.pcc_loss = pcc_loss(cx, cy)
    except Exception as exc:
        errors.append(_describe("pcc", exc))

    if scorer is not None:
        try:
            sx = score_utterance(scorer, mel_spectrogram(xr, cfg.mel_params)).utterance_score
            sy = score_utterance(scorer, mel_spectrogram(yr, cfg.mel_params)).utterance_score
            report.pmos_source, report.pmos_converted = sx, sy
            report.mos_loss = mos_loss_from_scores(sx, sy, lam.mos)
        except Exception as exc:
            errors.append(_describe("pmos", exc))

    report.error = "; ".join(errors) or None
    return report


def evaluate_all(entries, cfg: EvalConfig, scorer: Scorer | None = None,
                 keep_contours: bool = False, workers: int | None = None) -> list[PairReport]:
    """Evaluate pairs, in parallel when ``workers > 1``; results follow manifest order."""
    workers = workers or cfg.worker_count
    if scorer is None and cfg.scorer_weights_path is not None:
        scorer = load_scorer(cfg.scorer_weights_path)
    job = partial(evaluate_pair, cfg=cfg, scorer=scorer, keep_contours=keep_contours)
    if workers <= 1 or len(entries) <= 1:
        return [job(e) for e in entries]
    with ProcessPoolExecutor(max_workers=min(workers, len(entries))) as pool:
        return list(pool.map(job, entries))


def aggregate_reports(rs, metrics=None) -> SummaryReport:
    """Mean and population standard deviation per metric over pairs that produced it."""
    rs = list(rs)
    if metrics is None:
        has_mos = any(r.mos_loss is not None for r in rs)
        metrics = CORE_METRICS + (MOS_METRICS if has_mos else ())
    out = {}
    for name in metrics:
        values = [r.metric(name) for r in rs if r.metric(name) is not None]
        if values:
            arr = np.asarray(values, dtype=np.float64)
            out[name] = MetricSummary(float(np.mean(arr)), float(np.std(arr)), len(values),
                                      len(rs) - len(values))
        else:
            out[name] = MetricSummary(None, None, 0, len(rs))
    return SummaryReport(out)


def _fmt(v) -> str:
    return "" if v is None else format(v, ".17g")


def write_pairs_csv(path, rs) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for r in rs:
            writer.writerow([r.pair_id, *(_fmt(getattr(r, a)) for a in COLUMNS), r.error or ""])


def read_pairs_csv(path) -> list[PairReport]:
    reports = []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            values = {attr: (float(row[col]) if row[col] != "" else None)
                      for attr, col in COLUMNS.items()}
            reports.append(PairReport(row["pair_id"], error=row["error"] or None, **values))
    return reports


def write_summary_json(path, summary: SummaryReport) -> None:
    Path(path).write_text(json.dumps(summary.to_dict(), indent=2) + "\n", encoding="utf-8")


def write_contours(out_dir, rs, frame_len: int = 0) -> None:
    f0_dir = Path(out_dir) / "f0"
    f0_dir.mkdir(parents=True, exist_ok=True)
    for r in rs:
        if r.contours is None:
            continue
        src, cnv = r.contours
        write_contour_csv(f0_dir / f"{r.pair_id}_src.csv", src, frame_len)
        write_contour_csv(f0_dir / f"{r.pair_id}_cnv.csv", cnv, frame_len)
