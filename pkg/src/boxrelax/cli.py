"""Command-line front end.

Every data-producing command writes rows with the same columns (see
``COLUMNS``) so theory and simulation output can be overlaid from one file.
Diagnostics go to stderr. Exit codes: 0 ok, 2 bad arguments or unsupported
regime, 3 numerical failure or unwritable output.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import math
import sys

from . import theory
from .errors import InvalidArgument, NumericalFailure
from .model import make_shape
from .montecarlo import (
    THREADS_ENV,
    ComparisonRow,
    ExperimentConfig,
    compare_to_theory,
    joint_error_stats,
    run_trials,
    theory_row,
)

COLUMNS = [f.name for f in dataclasses.fields(ComparisonRow)]

EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL = 0, 2, 3


class UsageError(Exception):
    pass


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, int) and not isinstance(value, bool):
        return str(value)
    return format(float(value), ".17g")


def _json_value(value) -> str:
    if value is None:
        return "null"
    if isinstance(value, float) and math.isnan(value):
        return "NaN"
    if isinstance(value, float) and math.isinf(value):
        return "Infinity" if value > 0 else "-Infinity"
    return _fmt(value)


def _as_dict(row) -> dict:
    return row if isinstance(row, dict) else dataclasses.asdict(row)


def emit_rows(rows, fmt: str, sink, columns=COLUMNS) -> None:
    """Write rows as CSV (header always present) or a JSON array of objects.

    Missing fields are written empty (CSV) or null (JSON); floats carry 17
    significant digits so they re-parse bit-exactly.
    """
    rows = [_as_dict(r) for r in rows]
    if fmt == "csv":
        sink.write(",".join(columns) + "\n")
        for r in rows:
            sink.write(",".join(_fmt(r.get(c)) for c in columns) + "\n")
    elif fmt == "json":
        objs = [
            "{" + ", ".join(f'"{c}": {_json_value(r.get(c))}' for c in columns) + "}"
            for r in rows
        ]
        sink.write("[" + ",\n ".join(objs) + "]\n")
    else:
        raise UsageError(f"unknown format {fmt!r}")


def parse_floats(text: str) -> list[float]:
    """Parse "a,b,c" or a "start:stop:step" grid (stop inclusive)."""
    out = []
    for part in text.split(","):
        part = part.strip()
        if ":" in part:
            try:
                start, stop, step = (float(p) for p in part.split(":"))
            except ValueError:
                raise argparse.ArgumentTypeError(f"bad grid {part!r}, want start:stop:step")
            if step <= 0:
                raise argparse.ArgumentTypeError("grid step must be positive")
            count = int(math.floor((stop - start) / step + 1e-9)) + 1
            out.extend(round(start + i * step, 12) for i in range(count))
        else:
            try:
                out.append(float(part))
            except ValueError:
                raise argparse.ArgumentTypeError(f"not a number: {part!r}")
    return out


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be a positive integer, got {text}")
    return v


def _add_output(p):
    p.add_argument("--format", choices=("csv", "json"), default="csv", help="output format (default: %(default)s)")
    p.add_argument("--out", default="-", help="output file, '-' for stdout (default: %(default)s)")
    p.add_argument("--config", default=None, help="key = value file mirroring the flags; flags win (default: none)")


def _add_sim(p, trials, delta="1.0", snr="0"):
    p.add_argument("--n", type=_positive_int, default=512, help="transmit dimension (default: %(default)s)")
    p.add_argument("--delta", type=parse_floats, default=delta, help="ratio m/n, list or grid (default: %(default)s)")
    p.add_argument("--snr-db", type=parse_floats, default=snr, help="SNR in dB, list or start:stop:step (default: %(default)s)")
    p.add_argument("--trials", type=_positive_int, default=trials, help="independent trials per point (default: %(default)s)")
    p.add_argument("--seed", type=int, default=0, help="master seed (default: %(default)s)")
    p.add_argument("--tol", type=float, default=1e-8, help="solver KKT tolerance (default: %(default)s)")
    p.add_argument("--all-ones", action="store_true", help="transmit x0 = 1 instead of random signs (default: off)")
    p.add_argument("--workers", type=int, default=None, help=f"worker threads (default: ${THREADS_ENV} or CPU count)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="boxrelax",
        description="Box relaxation BPSK decoding: theory, simulation and AO validation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("predict", help="asymptotic BER Q(1/tau*) on a (delta, SNR) grid")
    p.add_argument("--delta", type=parse_floats, default="1.0", help="ratio m/n, list or grid (default: %(default)s)")
    p.add_argument("--snr-db", type=parse_floats, default="0", help="SNR in dB, list or start:stop:step (default: %(default)s)")
    p.add_argument("--tol", type=float, default=1e-12, help="tau* bracket tolerance (default: %(default)s)")
    p.add_argument("--method", choices=("fixed-point", "minimize"), default="fixed-point", help="tau* solver (default: %(default)s)")
    _add_output(p)

    p = sub.add_parser("simulate", help="Monte Carlo BER of the box decoder vs theory")
    _add_sim(p, trials=20)
    _add_output(p)

    p = sub.add_parser("ao", help="Monte Carlo BER of the auxiliary optimization vs theory")
    _add_sim(p, trials=50)
    _add_output(p)

    p = sub.add_parser("sweep", help="simulation + theory over a grid (defaults: the n=512 waterfall grid)")
    _add_sim(p, trials=20, delta="0.7,1.0", snr="0:12:1")
    p.add_argument("--path", choices=("po", "ao"), default="po", help="simulate the decoder (po) or the AO (default: %(default)s)")
    _add_output(p)

    p = sub.add_parser("independence", help="joint error frequency of random k-bit subsets vs Q^k(1/tau*)")
    _add_sim(p, trials=200)
    p.add_argument("--k", type=_positive_int, default=2, help="subset size (default: %(default)s)")
    p.add_argument("--subsets", type=_positive_int, default=2000, help="subsets per trial (default: %(default)s)")
    p.add_argument("--path", choices=("po", "ao"), default="po", help="simulate the decoder (po) or the AO (default: %(default)s)")
    _add_output(p)

    p = sub.add_parser("gap", help="high-SNR dB gap to the matched filter bound")
    p.add_argument("--delta", type=parse_floats, default="1.0", help="ratio m/n, list (default: %(default)s)")
    _add_output(p)
    return parser


def _read_config(path: str) -> dict:
    values = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected key = value")
            key, val = (s.strip() for s in line.split("=", 1))
            values[key.lstrip("-").replace("-", "_")] = val
    return values


def _parse(argv):
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "config", None):
        values = _read_config(args.config)
        subparser = parser._subparsers._group_actions[0].choices[args.command]
        known = {a.dest: a for a in subparser._actions}
        for key, val in values.items():
            action = known.get(key)
            if action is None or key in ("help", "config"):
                raise UsageError(f"{args.config}: unknown option {key!r} for {args.command}")
            if isinstance(action, argparse._StoreTrueAction):
                subparser.set_defaults(**{key: val.lower() in ("1", "true", "yes", "on")})
            else:
                subparser.set_defaults(**{key: val})
        args = parser.parse_args(argv)
    return args


def _shape(args, delta, snr_db):
    return make_shape(args.n, delta, snr_db)


def _theory_point(delta, snr_db, **kw):
    return theory.predict_pe(delta, make_shape(1, delta, snr_db).snr, **kw)


def _simulate(args, delta, snr_db, path):
    shape = _shape(args, delta, snr_db)
    config = ExperimentConfig(
        shape=shape,
        trials=args.trials,
        master_seed=args.seed,
        path=path,
        solver_tol=args.tol,
        force_all_ones_signal=args.all_ones,
    )
    summary = run_trials(config, workers=args.workers)
    return compare_to_theory(summary, theory.predict_pe(delta, shape.snr))


def _grid(args):
    return sorted((d, s) for d in args.delta for s in args.snr_db)


def _cmd_predict(args):
    return [
        theory_row(_theory_point(d, s, method=args.method, tol=args.tol), s) for d, s in _grid(args)
    ], COLUMNS


def _cmd_simulate(args, path="po"):
    return [_simulate(args, d, s, path) for d, s in _grid(args)], COLUMNS


def _cmd_sweep(args):
    return _cmd_simulate(args, args.path)


def _cmd_independence(args):
    rows = []
    for d, s in _grid(args):
        shape = _shape(args, d, s)
        config = ExperimentConfig(
            shape=shape,
            trials=args.trials,
            master_seed=args.seed,
            path=args.path,
            solver_tol=args.tol,
            force_all_ones_signal=args.all_ones,
        )
        stats = joint_error_stats(config, args.k, args.subsets, workers=args.workers)
        point = theory.predict_pe(d, shape.snr)
        diff = stats.joint_error_freq - stats.independence_prediction
        z = diff / stats.stderr if stats.stderr > 0 else (0.0 if diff == 0 else math.copysign(math.inf, diff))
        rows.append(
            ComparisonRow(
                snr_db=shape.snr_db,
                delta=d,
                n=shape.n,
                trials=args.trials,
                ber_mean=stats.joint_error_freq,
                ber_ci_lo=stats.joint_error_freq - 1.96 * stats.stderr,
                ber_ci_hi=stats.joint_error_freq + 1.96 * stats.stderr,
                pe_theory=stats.independence_prediction,
                pe_high_snr=point.pe_high_snr**args.k,
                pe_mfb=point.pe_mfb**args.k,
                tau_star=point.tau_star,
                z_score=z,
            )
        )
    return rows, COLUMNS


def _cmd_gap(args):
    return [{"delta": d, "gap_db": theory.snr_gap_db(d)} for d in args.delta], ["delta", "gap_db"]


COMMANDS = {
    "predict": _cmd_predict,
    "simulate": _cmd_simulate,
    "ao": lambda a: _cmd_simulate(a, "ao"),
    "sweep": _cmd_sweep,
    "independence": _cmd_independence,
    "gap": _cmd_gap,
}


def run_cli(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, stream=sys.stderr, format="%(levelname)s: %(message)s")
    try:
        args = _parse(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    except (UsageError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    try:
        rows, columns = COMMANDS[args.command](args)
    except (InvalidArgument, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL

    try:
        if args.out == "-":
            emit_rows(rows, args.format, sys.stdout, columns)
        else:
            with open(args.out, "w") as fh:
                emit_rows(rows, args.format, fh, columns)
    except OSError as exc:
        print(f"cannot write output: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


def main():
    sys.exit(run_cli())
