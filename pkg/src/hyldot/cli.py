"""Command-line interface: ``hyldot <command> [options]``.

Exit codes: 0 success, 2 invalid input, 3 numerical failure, 4 failed
acceptance check (``table1``).
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from hyldot import runner
from hyldot.errors import ContractViolation, NumericalError

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_NUMERICAL = 3
EXIT_ACCEPTANCE = 4


def _range(text: str) -> tuple[float, float]:
    try:
        lo, hi = (float(v) for v in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected lo:hi, got {text!r}") from None
    return lo, hi


def _gamma_grid(text: str) -> runner.GammaGrid:
    try:
        return runner.GammaGrid.parse(text)
    except runner.ConfigError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _common() -> argparse.ArgumentParser:
    """Options shared by the configurable commands; all default to None so
    that unset flags fall through to the config file and built-in defaults."""
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", help="key = value settings file (flags override it)")
    p.add_argument("--mode", choices=runner.MODES)
    p.add_argument("--eta", type=float, help="impurity strength (free_space: impurity charge)")
    p.add_argument("--gamma", type=float)
    p.add_argument("--gamma-grid", type=_gamma_grid, metavar="START:STOP:COUNT[:lin|log]")
    p.add_argument("--state", choices=runner.STATES)
    p.add_argument("--sz", type=int, choices=(-1, 0, 1))
    p.add_argument("--omega", type=int, help="basis order")
    mu = p.add_mutually_exclusive_group()
    mu.add_argument("--mu", type=float, help="fixed exponent")
    mu.add_argument("--mu-scan", type=_range, metavar="LO:HI", help="minimize the energy over mu in this range")
    p.add_argument("--R", type=float, help="outer radius of the kernel grid")
    p.add_argument("--nmax", type=int, help="radial subintervals")
    p.add_argument("--lmax", type=int, help="highest partial wave")
    p.add_argument("--quad", type=int, dest="Q", help="Gauss-Legendre order in cos(theta)")
    p.add_argument("--out", help="output file (default stdout)")
    p.add_argument("--format", choices=runner.FORMATS)
    p.add_argument("--cache-dir", help="operator and result cache directory")
    p.add_argument("--precision", choices=runner.PRECISIONS)
    p.add_argument("--jobs", type=int, help="worker processes for sweeps")
    p.add_argument("--no-cache", action="store_true", help="bypass the result cache")
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hyldot",
        description="Energies and entanglement entropies of two trapped electrons around a central impurity.",
    )
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)
    common = _common()
    sub.add_parser("energy", parents=[common], help="ground or lowest triplet energy")
    sub.add_parser("entropy", parents=[common], help="energy plus entanglement entropies")
    sub.add_parser("sweep", parents=[common], help="entropy records over a gamma grid")
    sub.add_parser("mu-scan", parents=[common], help="energy as a function of mu")

    t1 = sub.add_parser("table1", help="free-space helium linear-entropy convergence grid")
    t1.add_argument("--omega", type=int, default=14)
    t1.add_argument("--quad", type=int, dest="Q", default=64)
    t1.add_argument("--out")
    t1.add_argument("--format", choices=runner.FORMATS, default="csv")
    t1.add_argument("--cache-dir")

    gc = sub.add_parser("gamma-c", help="ionization threshold in gamma")
    gc.add_argument("--eta", type=float, default=-2.0)
    gc.add_argument("--omega", type=int, default=8)
    gc.add_argument("--bracket", type=_range, default=(0.1, 5.0), metavar="LO:HI")
    gc.add_argument("--tol", type=float, default=1e-4)
    gc.add_argument("--mu-scan", type=_range, default=(0.05, 200.0), metavar="LO:HI")
    gc.add_argument("--zero-point", action="store_true", help="add 3/2 for the detached electron")
    gc.add_argument("--out")
    gc.add_argument("--format", choices=runner.FORMATS, default="csv")
    gc.add_argument("--cache-dir")
    return parser


_NON_CONFIG = {"command", "verbose", "config", "no_cache", "mu_scan"}


def config_from_args(args: argparse.Namespace) -> runner.RunConfig:
    flags = {k: v for k, v in vars(args).items() if k not in _NON_CONFIG}
    if args.mu_scan is not None:
        flags["mu"] = "scan"
        flags["mu_scan"] = args.mu_scan
    file_settings = runner.load_config_file(args.config) if args.config else None
    return runner.build_config(None, file_settings, flags)


def _emit(text: str, out: str | None) -> None:
    if out:
        runner.atomic_write(Path(out), text)
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _use_cache_dir(path: str | None) -> None:
    if path:
        os.environ["HYLDOT_CACHE_DIR"] = str(Path(path).resolve())


def _point(kind: str, config: runner.RunConfig, no_cache: bool) -> runner.RunRecord:
    if no_cache:
        return runner.run_energy(config) if kind == "energy" else runner.run_entropy(config)
    return runner.cached_run(kind, config)


def _dispatch(args: argparse.Namespace) -> int:
    cmd = args.command
    if cmd == "table1":
        _use_cache_dir(args.cache_dir)
        rows = runner.run_table1(args.omega, args.Q)
        _emit(runner.rows_to_text(rows, args.format), args.out)
        bad = [r for r in rows if not r["ok"]]
        for r in bad:
            print(f"table1: cell l_max={r['l_max']} n_max={r['n_max']} off by {r['deviation']:.2e}", file=sys.stderr)
        return EXIT_ACCEPTANCE if bad else EXIT_OK
    if cmd == "gamma-c":
        _use_cache_dir(args.cache_dir)
        rec = runner.run_gamma_c(args.eta, args.omega, args.bracket, args.tol, args.zero_point, args.mu_scan)
        _emit(runner.rows_to_text([rec.row()], args.format), args.out)
        return EXIT_OK

    config = config_from_args(args)
    _use_cache_dir(config.cache_dir)
    if cmd == "mu-scan":
        _emit(runner.rows_to_text(runner.run_mu_scan(config), config.format), config.out)
        return EXIT_OK
    if cmd == "sweep":
        records = runner.run_sweep(config, use_cache=not args.no_cache)
        _emit(runner.format_records(records, config.format), config.out)
        failed = [r for r in records if r.error]
        for r in failed:
            print(f"sweep: gamma={r.gamma:g} failed: {r.error}", file=sys.stderr)
        return EXIT_NUMERICAL if failed else EXIT_OK
    if config.gamma_grid is not None:
        raise runner.ConfigError("--gamma-grid is only valid for the sweep command")
    rec = _point(cmd, config, args.no_cache)
    _emit(runner.format_records([rec], config.format), config.out)
    return EXIT_OK


def _error_record(kind: str, exc: BaseException) -> str:
    return json.dumps({"error": kind, "type": type(exc).__name__, "message": str(exc)})


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return _dispatch(args)
    except (runner.ConfigError, ContractViolation) as exc:
        print(_error_record("validation", exc), file=sys.stderr)
        return EXIT_INVALID
    except (NumericalError, ArithmeticError) as exc:
        print(_error_record("numerical", exc), file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
