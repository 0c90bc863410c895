"""Command line experiment runner.

Usage::

    sdpp run --config run.yaml [--out DIR] [--seed U64] [--format csv,json] [--workers K]
    sdpp validate --config run.yaml
    sdpp list-suites

``run`` exits with status 0 iff every check passes, 1 when some check
fails, 2 for an invalid configuration and 3 when a suite raises.
"""
from __future__ import annotations

import argparse
import csv
import io
import os
import sys
import time

from . import __version__
from .config import RunConfig, load_config
from .errors import ConfigInvalidError, NotASweepError, StationaryDPPError
from .report import ExperimentReport, atomic_write, fmt_float
from .suites import SUITES, run_suite
from .symbol import symbol_hash

__all__ = ["main", "run", "emit_plot_data"]

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_ERROR = 0, 1, 2, 3


def emit_plot_data(report: ExperimentReport, out_dir) -> list:
    """Write one CSV per sweep series (x column first, then y and envelopes).

    Returns
    -------
    list of str
        Paths written.

    Raises
    ------
    NotASweepError
    """
    if not report.sweep:
        raise NotASweepError(f"suite {report.suite!r} produced no sweep")
    paths = []
    for name, s in sorted(report.series.items()):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(s["columns"])
        for row in s["rows"]:
            w.writerow([fmt_float(x) for x in row])
        safe = name.replace("/", "_")
        path = os.path.join(out_dir, f"{report.suite}_{safe}.csv")
        atomic_write(path, buf.getvalue())
        paths.append(path)
    return paths


def _write_outputs(rep: ExperimentReport, cfg: RunConfig, parts):
    out = cfg.out_dir
    if "csv" in cfg.formats:
        for part in parts:
            atomic_write(os.path.join(out, f"{part.suite}.csv"), part.to_csv())
            if part.sweep:
                emit_plot_data(part, out)
    if "json" in cfg.formats:
        atomic_write(os.path.join(out, "report.json"), rep.to_json())


def run(cfg: RunConfig, log=sys.stderr) -> tuple:
    """Execute a validated configuration and write its outputs.

    Returns
    -------
    (ExperimentReport, int)
        The combined report and the process exit status.
    """
    names = list(SUITES) if cfg.suite == "all" else [cfg.suite]
    combined = ExperimentReport(cfg.suite)
    combined.config = cfg.resolved()
    combined.provenance = {"seed": str(cfg.seed), "symbol_sha256": symbol_hash(cfg.symbol),
                           "version": __version__}
    parts = []
    status = EXIT_OK
    t0 = time.perf_counter()
    for name in names:
        t1 = time.perf_counter()
        try:
            part = run_suite(name, cfg.symbol, cfg.suite_params(name), cfg.seed, cfg.workers)
        except (StationaryDPPError, ValueError, ArithmeticError) as exc:
            print(f"suite {name} failed: {type(exc).__name__}: {exc}", file=log)
            status = EXIT_ERROR
            break
        part.provenance = combined.provenance
        part.wall_time = time.perf_counter() - t1
        parts.append(part)
        combined.extend(part, prefix=f"{name}/" if cfg.suite == "all" else "")
        print(part.summary(), file=log)
    combined.wall_time = time.perf_counter() - t0
    combined.sweep = any(p.sweep for p in parts)
    # partial outputs are flushed even when a suite raised
    _write_outputs(combined, cfg, parts)
    if status == EXIT_OK and not combined.passed:
        status = EXIT_FAIL
    return combined, status


def _parser():
    ap = argparse.ArgumentParser(prog="sdpp", description="Stationary DPP experiment runner")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run a suite from a configuration file")
    r.add_argument("--config", required=True)
    r.add_argument("--out", default=None, help="output directory (overrides the config)")
    r.add_argument("--seed", default=None, help="unsigned 64-bit seed override")
    r.add_argument("--format", default=None, help="comma separated subset of csv,json")
    r.add_argument("--workers", type=int, default=None)
    v = sub.add_parser("validate", help="check a configuration without running it")
    v.add_argument("--config", required=True)
    sub.add_parser("list-suites", help="print the available suites")
    return ap


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    if args.command == "list-suites":
        for name, spec in SUITES.items():
            print(f"{name:18s} {spec.doc}")
        print(f"{'all':18s} every suite above")
        return EXIT_OK
    try:
        if args.command == "validate":
            cfg = load_config(args.config)
            print(f"ok: suite {cfg.suite}, seed {cfg.seed}")
            return EXIT_OK
        cfg = load_config(args.config, seed_override=args.seed, out_override=args.out,
                          formats_override=args.format, workers_override=args.workers)
    except ConfigInvalidError as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    _, status = run(cfg)
    return status


if __name__ == "__main__":
    sys.exit(main())
