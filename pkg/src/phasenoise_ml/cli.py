"""Command-line front end.

    phasenoise-ml simulate --mode sync --constellation 2 --antennas 4 --kappa 5 \\
        --snr-db 0:5:40 --trials 100000 --seed 7
    phasenoise-ml floor --constellation 2 --kappa 0,3,5
    phasenoise-ml bound --constellation 8 --kappa 10 --antennas 5
    phasenoise-ml verify

Every flag can also come from ``--config FILE`` holding ``key = value`` lines
(``snr-db = 0:5:40``); explicit flags win.
"""
from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

import numpy as np

from . import analysis, verify
from .montecarlo import DETECTORS, WORKERS_ENV, SimConfig, default_workers, sweep
from .phase_noise import general_fourier

SIMULATE_HEADER = ["mode", "detector", "M", "kappa", "N", "snr_db", "trials", "errors",
                   "ser", "ci_low", "ci_high", "seed"]
FLOOR_HEADER = ["N", "kappa", "floor"]
BOUND_HEADER = ["N", "kappa", "M", "n", "pairwise_bound", "union_bound"]


def fmt(v):
    if v is None:
        return ""
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".17g")


def parse_snr(text: str) -> list[float]:
    """``start:step:stop`` (inclusive) or a comma list, in dB."""
    out: list[float] = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if ":" in part:
            bits = part.split(":")
            if len(bits) != 3:
                raise argparse.ArgumentTypeError(f"bad SNR range {part!r}")
            start, step, stop = map(float, bits)
            if step <= 0:
                raise argparse.ArgumentTypeError("SNR step must be positive")
            k = int(np.floor((stop - start) / step + 1e-9))
            out.extend(float(start + i * step) for i in range(k + 1))
        else:
            out.append(float(part))
    if not all(np.isfinite(out)):
        raise argparse.ArgumentTypeError("SNR values must be finite")
    return out


def _list(conv):
    def parse(text):
        try:
            return [conv(v) for v in str(text).split(",") if v.strip()]
        except ValueError as exc:
            raise argparse.ArgumentTypeError(str(exc))
    return parse


def read_coefficients(path) -> list[float]:
    """Plain-text coefficient list: whitespace/comma separated, ``#`` comments."""
    vals: list[float] = []
    for line in Path(path).read_text().splitlines():
        line = line.split("#", 1)[0].replace(",", " ")
        vals.extend(float(v) for v in line.split())
    return vals


def read_config(path) -> list[str]:
    argv: list[str] = []
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ValueError(f"config line without '=': {raw!r}")
        argv += ["--" + key.strip().replace("_", "-"), value.strip()]
    return argv


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="phasenoise-ml", description=__doc__.split("\n")[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="key = value file mirroring the flags")
        sp.add_argument("-o", "--output", help="CSV path (default: stdout)")

    sim = sub.add_parser("simulate", help="Monte Carlo SER sweep")
    common(sim)
    sim.add_argument("--mode", choices=["sync", "nonsync"], required=True)
    sim.add_argument("--detector", choices=DETECTORS, default="exact_ml")
    sim.add_argument("--constellation", type=int, default=2, help="PSK order N")
    sim.add_argument("--antennas", type=int, required=True)
    group = sim.add_mutually_exclusive_group(required=True)
    group.add_argument("--kappa", type=float, help="von Mises concentration")
    group.add_argument("--fourier-coeffs", help="file with alpha_0, alpha_1, ...")
    sim.add_argument("--snr-db", type=parse_snr, required=True)
    sim.add_argument("--trials", type=int, default=10_000)
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--trunc", type=int, default=None, help="series truncation cap")
    sim.add_argument("--workers", type=int, default=None,
                     help=f"worker processes (default ${WORKERS_ENV} or 1)")
    sim.add_argument("--stop-errors", type=int, default=None,
                     help="stop a cell after this many errors ...")
    sim.add_argument("--min-trials", type=int, default=0, help="... once this many trials ran")

    fl = sub.add_parser("floor", help="synchronous high-SNR SER floor")
    common(fl)
    fl.add_argument("--constellation", type=_list(int), required=True)
    fl.add_argument("--kappa", type=_list(float), required=True)

    bd = sub.add_parser("bound", help="Bernstein pairwise and union bounds")
    common(bd)
    bd.add_argument("--constellation", type=_list(int), required=True)
    bd.add_argument("--kappa", type=_list(float), required=True)
    bd.add_argument("--antennas", type=_list(int), required=True)

    vf = sub.add_parser("verify", help="run the oracle self-checks")
    vf.add_argument("--config", help=argparse.SUPPRESS)
    return p


def _expand_config(argv: list[str]) -> list[str]:
    if "--config" not in argv:
        return argv
    i = argv.index("--config")
    if i + 1 >= len(argv):
        return argv
    extra = read_config(argv[i + 1])
    rest = argv[:i] + argv[i + 2:]
    # subcommand first, then file values, then explicit flags (last one wins)
    cmd = next(k for k, a in enumerate(rest) if not a.startswith("-"))
    return rest[:cmd + 1] + extra + rest[cmd + 1:]


def _validate(parser, args):
    if args.command == "simulate":
        if args.trials < 1:
            parser.error("--trials must be >= 1")
        if args.constellation < 2:
            parser.error("--constellation must be >= 2")
        if args.antennas < 1:
            parser.error("--antennas must be >= 1")
        if args.kappa is not None and args.kappa < 0:
            parser.error("--kappa must be >= 0")
        if args.trunc is not None and not 1 <= args.trunc <= 256:
            parser.error("--trunc must be in [1, 256]")
        if args.workers is not None and args.workers < 1:
            parser.error("--workers must be >= 1")
    elif args.command in ("floor", "bound"):
        if any(n < 2 for n in args.constellation):
            parser.error("--constellation must be >= 2")
        if any(k < 0 for k in args.kappa):
            parser.error("--kappa must be >= 0")
        if args.command == "bound" and any(m < 1 for m in args.antennas):
            parser.error("--antennas must be >= 1")


def _write(rows, header, output):
    handle = open(output, "w", newline="") if output else sys.stdout
    try:
        w = csv.writer(handle, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([fmt(v) for v in r])
    finally:
        if output:
            handle.close()


def _simulate(parser, args):
    model = None
    if args.fourier_coeffs:
        try:
            model = general_fourier(read_coefficients(args.fourier_coeffs))
        except (OSError, ValueError) as exc:
            parser.error(f"--fourier-coeffs: {exc}")
    cfg = SimConfig(mode=args.mode, detector=args.detector, N=args.constellation, M=args.antennas,
                    kappa=args.kappa, snr_db_points=args.snr_db, trials=args.trials,
                    master_seed=args.seed, trunc=args.trunc, phase_model=model,
                    stop_errors=args.stop_errors, min_trials=args.min_trials)
    workers = args.workers if args.workers is not None else default_workers()
    rows = [(cfg.mode.short, cfg.detector, cfg.M, cfg.kappa, cfg.N, snr, est.trials, est.errors,
             est.ser, est.ci_low, est.ci_high, cfg.master_seed)
            for snr, est in sweep(cfg, workers)]
    _write(rows, SIMULATE_HEADER, args.output)
    return 0


def run(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        argv = _expand_config(argv)
    except (OSError, ValueError) as exc:
        parser.error(str(exc))
    args = parser.parse_args(argv)
    _validate(parser, args)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)

    if args.command == "simulate":
        return _simulate(parser, args)
    if args.command == "floor":
        rows = [(n, k, analysis.ser_floor_sync(n, k)) for n in args.constellation for k in args.kappa]
        _write(rows, FLOOR_HEADER, args.output)
        return 0
    if args.command == "bound":
        rows = []
        for N in args.constellation:
            for k in args.kappa:
                for M in args.antennas:
                    union = analysis.union_bound_ser(N, k, M)
                    rows += [(N, k, M, n, analysis.bernstein_pairwise_bound(n, N, k, M), union)
                             for n in range(1, N)]
        _write(rows, BOUND_HEADER, args.output)
        return 0
    checks = verify.run_all()
    for c in checks:
        print(c.line())
    return 0 if all(c.passed for c in checks) else 1


def main():
    try:
        code = run()
    except SystemExit as exc:
        code = exc.code if isinstance(exc.code, int) else 2
    sys.exit(code)


if __name__ == "__main__":
    main()
