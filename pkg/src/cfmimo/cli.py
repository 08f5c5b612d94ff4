"""Command-line front end: ``cfmimo sweep | schedule | validate``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
import time

import numpy as np

from . import __version__
from .config import ConfigError, format_config, parse_config
from .harness import NETWORKS, ExperimentConfig, SweepReport, build_networks, run_sweep
from .precoding import SingularChannelError
from .rates import NetworkEvaluator
from .scenario import ConfigurationError, generate_scenario, realize_channels
from .scheduling import CapacityError

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2

log = logging.getLogger("cfmimo")


def _fmt(x) -> str:
    if isinstance(x, str):
        return x
    if isinstance(x, float) and math.isnan(x):
        return "nan"
    return f"{x:.6g}"


def emit_csv(report: SweepReport, out) -> None:
    """Write the report rows; ``out`` is a path or a text stream."""
    if not report.rows:
        raise ValueError("empty report")
    if isinstance(out, (str, os.PathLike)):
        with open(out, "w", newline="", encoding="utf-8") as fh:
            emit_csv(report, fh)
        return
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(SweepReport.COLUMNS)
    for row in report.rows:
        writer.writerow([_fmt(v) for v in row])


def _overrides(args) -> dict:
    out = {}
    if getattr(args, "seed", None) is not None:
        out["master_seed"] = args.seed
    if getattr(args, "trials", None) is not None:
        out["n_trials"] = args.trials
    return out


def cmd_sweep(args) -> int:
    cfg = parse_config(args.config, _overrides(args))
    os.makedirs(args.out, exist_ok=True)
    t0 = time.perf_counter()
    report = run_sweep(cfg, jobs=args.jobs)
    elapsed = time.perf_counter() - t0

    csv_path = os.path.join(args.out, "sweep.csv")
    emit_csv(report, csv_path)
    with open(os.path.join(args.out, "resolved.cfg"), "w", encoding="utf-8") as fh:
        fh.write(format_config(cfg))
    figures = [] if args.no_plots else _plot(report, args.out)
    manifest = {
        "config_path": args.config,
        "output_dir": os.path.abspath(args.out),
        "config": format_config(cfg),
        "version": __version__,
        "wall_clock_s": round(elapsed, 3),
        "dominance_checked": report.dominance_checked,
        "dominance_violations": len(report.dominance_violations),
        "warnings": report.warnings,
        "figures": [os.path.basename(p) for p in figures],
    }
    with open(os.path.join(args.out, "manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2)
    if not args.quiet:
        print(f"wrote {csv_path} ({len(report.rows)} rows, {elapsed:.1f} s)")
    return EXIT_OK


def _plot(report, out_dir):
    from .plotting import plot_report

    return plot_report(report.rows, out_dir)


def cmd_schedule(args) -> int:
    from .harness import _schedule

    cfg = parse_config(args.config, _overrides(args))
    seed = np.random.SeedSequence(cfg.master_seed, spawn_key=(args.trial,))
    rng = np.random.default_rng(seed)
    scenario = generate_scenario(cfg.scenario, rng)
    channels = realize_channels(scenario, cfg.scenario, rng)
    if args.dump_scenario:
        print(scenario.as_text())
    snr = cfg.snr_points_db[0] if args.snr is None else args.snr
    noise_var = cfg.symbol_energy / 10.0 ** (snr / 10.0)
    nets = build_networks(cfg, scenario, channels)
    status = EXIT_OK
    for name in NETWORKS:
        if name not in nets:
            continue
        model = nets[name]
        for prec in cfg.precoders:
            ev = NetworkEvaluator(model.H, model.groups, prec, noise_var, model.Q)
            cache: dict = {}
            print(f"[{name} {prec} snr={snr:g} dB]")
            for method in cfg.methods:
                try:
                    sel, flops = _schedule(method, model, ev, noise_var, cache, cfg.exhaustive_cap)
                except (CapacityError, SingularChannelError) as exc:
                    print(f"  {method:14s} error: {exc}")
                    status = EXIT_RUNTIME
                    continue
                users = sorted(u for part in sel for u in part)
                print(f"  {method:14s} rate={ev(sel):10.4f}  flops={flops:<10d} users={users}")
    return status


def cmd_validate(args) -> int:
    from .checks import run_checks

    ok = True
    for name, passed, detail in run_checks(args.seed or 0):
        ok &= passed
        if not args.quiet or not passed:
            print(f"{'PASS' if passed else 'FAIL'}  {name}: {detail}")
    return EXIT_OK if ok else EXIT_RUNTIME


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cfmimo", description="User scheduling in multicell and cell-free massive MIMO."
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="key = value configuration file")
        p.add_argument("--seed", type=int, help="master seed (overrides the config)")
        p.add_argument("--trials", type=int, help="number of Monte Carlo trials")
        p.add_argument("--quiet", action="store_true")

    p = sub.add_parser("sweep", help="run the full SNR sweep and write CSV, manifest and figures")
    common(p)
    p.add_argument("--out", default="results", help="output directory")
    p.add_argument("--jobs", type=int, default=1, help="worker processes for trials")
    p.add_argument("--no-plots", action="store_true", help="skip the PNG figures")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("schedule", help="schedule one realization and print the chosen sets")
    common(p)
    p.add_argument("--snr", type=float, help="SNR in dB (default: first configured point)")
    p.add_argument("--trial", type=int, default=0, help="trial index whose drop is used")
    p.add_argument("--dump-scenario", action="store_true", help="print the drop geometry")
    p.set_defaults(func=cmd_schedule)

    p = sub.add_parser("validate", help="run invariant checks on small random instances")
    common(p)
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.ERROR if args.quiet else logging.WARNING, format="%(levelname)s %(message)s"
    )
    try:
        return args.func(args)
    except (ConfigError, ConfigurationError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (CapacityError, SingularChannelError, OSError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
