"""``perceptloss eval`` batch evaluator.

Exit codes: 0 when at least one pair produced a metric, 2 when every pair
failed, 1 on usage, manifest or config errors.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from .audio import parse_manifest
from .config import EvalConfig, load_config
from .errors import PerceptLossError
from .evaluate import (
    CORE_METRICS,
    MOS_METRICS,
    aggregate_reports,
    evaluate_all,
    write_contours,
    write_pairs_csv,
    write_summary_json,
)
from .mos import load_scorer

log = logging.getLogger("perceptloss")

CONFIG_ENV = "PERCEPTLOSS_CONFIG"


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="perceptloss", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    ev = sub.add_parser("eval", help="evaluate a manifest of (source, converted) pairs")
    ev.add_argument("--manifest", required=True, type=Path)
    ev.add_argument("--config", type=Path,
                    help=f"JSON config; falls back to ${CONFIG_ENV}, then built-in defaults")
    ev.add_argument("--out", required=True, type=Path)
    ev.add_argument("--dump-f0", action="store_true", help="write f0/<pair_id>_{src,cnv}.csv")
    ev.add_argument("--workers", type=int)
    return parser


def _eval(args) -> int:
    config_path = args.config or os.environ.get(CONFIG_ENV)
    try:
        cfg = load_config(config_path) if config_path else EvalConfig()
        entries = parse_manifest(args.manifest)
        scorer = load_scorer(cfg.scorer_weights_path) if cfg.scorer_weights_path else None
    except (PerceptLossError, OSError) as exc:
        log.error("%s", exc)
        return 1
    workers = args.workers if args.workers is not None else cfg.worker_count
    if workers < 1:
        log.error("--workers must be >= 1")
        return 1

    reports = evaluate_all(entries, cfg, scorer, keep_contours=args.dump_f0, workers=workers)
    for r in reports:
        if r.error:
            log.warning("pair %s: %s", r.pair_id, r.error)

    args.out.mkdir(parents=True, exist_ok=True)
    write_pairs_csv(args.out / "pairs.csv", reports)
    metrics = CORE_METRICS + (MOS_METRICS if scorer is not None else ())
    write_summary_json(args.out / "summary.json", aggregate_reports(reports, metrics))
    if args.dump_f0:
        write_contours(args.out, reports, cfg.f0_params.frame_len)

    ok = sum(r.succeeded for r in reports)
    log.info("%d of %d pairs evaluated", ok, len(reports))
    return 0 if ok else 2


def run(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s",
                        stream=sys.stderr)
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 1
    if args.command == "eval":
        return _eval(args)
    return 1


def main() -> None:
    sys.exit(run())
