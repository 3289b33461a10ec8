"""Command-line front end.

    slotqed run SCENARIO [--out DIR] [--workers N] [--quiet | --verbose]
    slotqed verify
    slotqed tables [--dir DIR]

Exit codes: 0 success, 3 configuration error, 4 runtime error,
5 verification failure.
"""
from __future__ import annotations

import argparse
import logging
import math
import os
import subprocess
import sys
import time
from pathlib import Path

from . import __version__
from .errors import ConfigError, FitError, ParseError, SlotQEDError

EXIT_OK = 0
EXIT_CONFIG = 3
EXIT_RUNTIME = 4
EXIT_VERIFY = 5
WORKERS_ENV = "SLOTQED_WORKERS"

log = logging.getLogger("slotqed")


def version_string() -> str:
    """Package version plus ``git describe`` output when run from a checkout."""
    try:
        out = subprocess.run(
            ["git", "describe", "--tags", "--always", "--dirty"],
            cwd=Path(__file__).parent, capture_output=True, text=True, timeout=5,
        )
        if out.returncode == 0 and out.stdout.strip():
            return f"{__version__}+{out.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return __version__


def _fit(cfg, sc, spec):
    from .analysis import fit_lineshape, fit_lorentzian
    from .scenario import doppler_width

    if cfg.fit.model == "lorentzian":
        return fit_lorentzian(spec)
    return fit_lineshape(spec, doppler_width(cfg, sc))


def run_scenario(cfg, out_dir, workers=1):
    """Execute the declared sweep and write spectra, the shift table and a manifest."""
    from .dynamics import simulate_spectrum
    from .ingest import write_spectrum_table, write_table
    from .scenario import sweep_points

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    digest = cfg.config_hash()
    t0 = time.perf_counter()
    points = sweep_points(cfg)
    rows = []
    for i, (axis, value, sc) in enumerate(points):
        g0 = sc.params.gamma0
        det = cfg.detuning.grid(g0)
        log.info("point %d/%d: %s = %g, %d atoms", i + 1, len(points), axis, value, sc.ensemble.n_atoms)
        spec = simulate_spectrum(sc, det, cfg.trials, workers, metadata={"config_hash": digest, "sweep_axis": axis, "sweep_value": value})
        name = f"spectrum_{i:03d}.txt"
        write_spectrum_table(out / name, spec, cfg.output.detuning_unit)
        shift = err = width = math.nan
        flag = "ok"
        if spec.metadata["aborted_trials"]:
            flag = f"aborted_trials={len(spec.metadata['aborted_trials'])}"
        if cfg.fit.model != "none":
            try:
                fit = _fit(cfg, sc, spec)
                shift, err, width = fit.shift / g0, fit.shift_err / g0, fit.gamma_l / g0
                if not fit.converged:
                    flag = "nonconverged"
            except FitError as exc:
                log.warning("fit failed at %s = %g: %s", axis, value, exc)
                flag = "fit_failed"
        reported = shift + cfg.output.cp_offset_over_gamma0
        rows.append((value, sc.omega0 / g0, sc.ensemble.n_atoms, shift, err, width, reported, flag, name))
    meta = {"config_hash": digest, "seed": cfg.seed, "trials": cfg.trials, "fit_model": cfg.fit.model,
            "cp_offset_over_gamma0": cfg.output.cp_offset_over_gamma0}
    write_table(
        out / "shifts.txt",
        ["sweep_value", "omega0", "n_atoms", "shift", "shift_err", "gamma_l", "shift_reported", "flag", "spectrum"],
        [cfg.sweep.axis, "gamma0", "1", "gamma0", "gamma0", "gamma0", "gamma0", "-", "-"],
        [(r[0], r[1], r[2], r[3], r[4], r[5], r[6], r[7], r[8]) for r in rows],
        meta,
    )
    (out / "config.yaml").write_text(cfg.resolved_yaml())
    manifest = {
        "config_hash": digest,
        "seed": cfg.seed,
        "wall_time_s": f"{time.perf_counter() - t0:.3f}",
        "version": version_string(),
        "workers": workers,
    }
    (out / "manifest.txt").write_text("".join(f"{k}: {v}\n" for k, v in manifest.items()))
    return rows


def _default_workers() -> int:
    raw = os.environ.get(WORKERS_ENV)
    if raw is None:
        return 1
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from None
    if n < 1:
        raise ConfigError(f"{WORKERS_ENV} must be >= 1")
    return n


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="slotqed", description="Collective line shifts of thermal atoms in a slot waveguide.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    verbosity = common.add_mutually_exclusive_group()
    verbosity.add_argument("--quiet", "-q", action="store_true", help="only report errors")
    verbosity.add_argument("--verbose", "-v", action="store_true", help="log progress of every sweep point")
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", parents=[common], help="run a scenario file")
    run.add_argument("scenario", type=Path)
    run.add_argument("--out", type=Path, help="output directory (overrides output.directory)")
    run.add_argument("--workers", type=int, help=f"worker processes (default ${WORKERS_ENV} or 1)")

    sub.add_parser("verify", parents=[common], help="run the oracle checks and print a pass/fail table")

    tables = sub.add_parser("tables", parents=[common], help="regenerate the committed oracle tables")
    tables.add_argument("--dir", type=Path, help="target directory (default: the packaged tables)")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.ERROR if args.quiet else logging.INFO if args.verbose else logging.WARNING
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")

    if args.command == "verify":
        from .verify import format_report, run_checks

        checks = run_checks()
        print(format_report(checks))
        return EXIT_OK if all(c.passed for c in checks) else EXIT_VERIFY

    if args.command == "tables":
        from .ingest import ORACLE_DIR, write_oracle_tables

        for path in write_oracle_tables(args.dir or ORACLE_DIR):
            if not args.quiet:
                print(path)
        return EXIT_OK

    from .scenario import load_scenario

    try:
        cfg = load_scenario(args.scenario)
        workers = args.workers if args.workers is not None else _default_workers()
        if workers < 1:
            raise ConfigError("--workers must be >= 1")
        out = args.out or Path(cfg.output.directory)
        rows = run_scenario(cfg, out, workers)
    except (ConfigError, ParseError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SlotQEDError as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    if not args.quiet:
        for r in rows:
            print(f"{r[8]}: sweep value {r[0]:g}, shift {r[3]:+.4g} +- {r[4]:.2g} Gamma0 ({r[7]})")
        print(f"results in {out}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
