"""Command line entry point.

Each subcommand selects one verification scenario, reads a JSON config, and
writes a CSV and JSON report.  Exit status is zero exactly when every
per-step pass flag is true.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace

from .harness import SCENARIOS, emit_report, load_config, run_experiment

SUBCOMMANDS = {
    "rates": "rate_table",
    "kalman-check": "kalman_contraction",
    "pf-contract": "pf_logistic_contraction",
    "tensor-check": "tensor_invariance",
    "tightness": "tightness",
    "couple": "coupling_pathwise",
    "smooth-w": "smoothing_theorem2",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wcontract",
        description="Verify Wasserstein contraction bounds for nonlinear filters.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, scenario in SUBCOMMANDS.items():
        p = sub.add_parser(name, help=f"run the {scenario} scenario")
        p.add_argument("--config", required=True, help="path to a JSON config")
        p.add_argument("--seed", type=int, default=None, help="override config seed")
        p.add_argument("--out", default=None, help="override output path stem")
        p.add_argument("--threads", type=int, default=None, help="override worker count")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    config = load_config(args.config)
    scenario = SUBCOMMANDS[args.command]
    overrides = {"scenario": scenario}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.out is not None:
        overrides["out"] = args.out
    if args.threads is not None:
        overrides["threads"] = args.threads
    config = replace(config, **overrides)

    report = run_experiment(config)
    stem = config.out or "report"
    emit_report(report, "csv", stem + ".csv")
    emit_report(report, "json", stem + ".json")

    n_pass = sum(r.passed for r in report.rows)
    status = "PASS" if report.all_passed else "FAIL"
    print(
        f"{scenario}: {status} ({n_pass}/{len(report.rows)} rows passed, "
        f"{report.metadata['wall_time_s']:.2f}s) -> {stem}.csv, {stem}.json"
    )
    return 0 if report.all_passed else 1


if __name__ == "__main__":
    sys.exit(main())
