"""Command-line harness for running experiments from config files.

Exit codes: 0 success, 2 configuration error, 3 runtime/divergence error.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .config import ConfigError, dump_yaml, load_config
from .harness import comb_spectrum, run_experiment, run_omega_scan, run_sweep, save_results
from .reservoir import DivergenceError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", required=True, help="experiment config file (YAML)")
    parser.add_argument("--dataset", help="override the task dataset path")
    parser.add_argument("--seed", type=int, help="override the master seed")
    parser.add_argument("--jobs", type=int, default=1, help="worker processes for sweeps")
    parser.add_argument("--plot", action="store_true", help="emit SVG plots next to results")
    parser.add_argument("--output", help="override the output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="combrc",
        description="Frequency-multiplexed photonic deep reservoir computer: "
        "simulation and benchmarks.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in (
        ("run", "run a single experiment"),
        ("sweep", "run the configured axis sweep"),
        ("omega-scan", "scan the comb line spacing, scoring each band"),
        ("comb-spectrum", "dump input comb line amplitudes and powers"),
        ("validate-config", "parse and validate a config file"),
    ):
        _add_common(sub.add_parser(name, help=text))
    return parser


def _load(args):
    cfg = load_config(args.config)
    if args.dataset is not None:
        cfg = replace(cfg, dataset=args.dataset)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    if args.output is not None:
        cfg = replace(cfg, output_dir=args.output)
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
    )
    try:
        cfg = _load(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        if args.command == "validate-config":
            print(f"OK: {args.config}")
            return EXIT_OK
        if args.command == "comb-spectrum":
            rows = comb_spectrum(cfg)
            outdir = Path(cfg.output_dir)
            outdir.mkdir(parents=True, exist_ok=True)
            path = outdir / "comb_spectrum.csv"
            with open(path, "w", newline="", encoding="utf-8") as fh:
                writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
                writer.writeheader()
                writer.writerows(rows)
            print(path)
            return EXIT_OK
        if args.command == "run":
            results = [run_experiment(cfg)]
        elif args.command == "sweep":
            results = run_sweep(cfg, jobs=args.jobs)
        else:  # omega-scan
            results = run_omega_scan(cfg, jobs=args.jobs)
        outdir = save_results(results, cfg, cfg.output_dir, make_plots=args.plot)
        for record, _ in results:
            point = "" if record.axis is None else f" {record.axis}={record.axis_value:g}"
            band = f" band={record.extra['band']}" if "band" in record.extra else ""
            print(
                f"{record.mode}/{record.task}{point}{band}: "
                f"{record.metric}={record.mean:.6g} +- {record.std:.3g}"
            )
        print(f"results written to {outdir}")
        return EXIT_OK
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DivergenceError, ValueError, RuntimeError, ArithmeticError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
