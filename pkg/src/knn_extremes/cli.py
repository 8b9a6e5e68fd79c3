"""
Command-line interface.

Subcommands::

    volume       two-ball union volumes (alias: geometry), or a ball/cube volume with --center
    expectation  threshold and exact expected exceedance count
    simulate     replicated experiment; writes replicate CSV and summary JSON
    chenstein    as simulate, with grid diagnostics and a diagnostics JSON
    sweep        one experiment per sample size; writes a combined CSV

Exit status is 2 for invalid arguments, 1 for runtime failures, 0 otherwise.
Output files go to ``--out``, defaulting to ``$KNN_EXTREMES_OUT`` or ``./results``.
"""

import argparse
import json
import logging
import math
import os
import sys
from pathlib import Path

from .experiment import ExperimentConfig, persist, run_experiment, write_sweep_csv
from .geometry import ball_box_volume, union_two_balls_exact, union_two_balls_paper_formula
from .limits import expected_count, threshold

OUT_ENV = "KNN_EXTREMES_OUT"

log = logging.getLogger("knn_extremes")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _positive_int(text):
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}")
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1: {value}")
    return value


def _finite(text):
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}")
    if not math.isfinite(value):
        raise argparse.ArgumentTypeError(f"must be finite: {text}")
    return value


def _seed(text):
    try:
        value = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer seed: {text!r}")
    if not 0 <= value < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be in [0, 2^64)")
    return value


def _int_list(text):
    try:
        values = [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated integer list: {text!r}")
    if not values:
        raise argparse.ArgumentTypeError("empty list")
    return values


def _float_list(text):
    try:
        return [float(x) for x in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}")


def _add_run_flags(p, n_required=True):
    if n_required:
        p.add_argument("--n", type=_positive_int, required=True, help="sample size")
    p.add_argument("--dim", type=_positive_int, default=2)
    p.add_argument("--k", type=_positive_int, default=1, help="neighbor order")
    p.add_argument("--t", type=_finite, default=0.0, help="threshold offset")
    p.add_argument("--reps", type=_positive_int, default=100, help="number of replicates")
    p.add_argument("--epsilon", type=_finite, default=0.5, help="grid exponent")
    p.add_argument("--density", default=None,
                   help="density JSON (inline or file path); default uniform")
    p.add_argument("--seed", type=_seed, default=0, help="master seed")
    p.add_argument("--out", default=None, help=f"output directory (default ${OUT_ENV} or ./results)")
    p.add_argument("--workers", type=_positive_int, default=None,
                   help="worker processes (default: all CPUs)")
    p.add_argument("--json", action="store_true", help="print machine-readable JSON")


def build_parser():
    parser = _Parser(prog="knn-extremes",
                     description="Large kth-nearest-neighbor balls: closed forms and simulation.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("volume", aliases=["geometry"], help="union of two balls, or ball/cube")
    p.add_argument("--dim", type=_positive_int, default=2)
    p.add_argument("--radius", type=_finite, default=1.0)
    p.add_argument("--distance", type=_finite, default=None, help="distance between centers")
    p.add_argument("--paper-formula", action="store_true",
                   help="also evaluate the closed form valid in the plane (unit radius)")
    p.add_argument("--center", type=_float_list, default=None,
                   help="ball center; computes the ball/unit-cube volume instead")
    p.add_argument("--json", action="store_true")

    p = sub.add_parser("expectation", help="threshold and exact expected count")
    p.add_argument("--n", type=_positive_int, required=True)
    p.add_argument("--k", type=_positive_int, default=1)
    p.add_argument("--t", type=_finite, default=0.0)
    p.add_argument("--json", action="store_true")

    p = sub.add_parser("simulate", help="replicated experiment")
    _add_run_flags(p)
    p = sub.add_parser("chenstein", help="experiment with grid diagnostics")
    _add_run_flags(p)
    p = sub.add_parser("sweep", help="one experiment per sample size")
    p.add_argument("--n-list", type=_int_list, required=True, help="e.g. 1000,10000")
    _add_run_flags(p, n_required=False)
    p.add_argument("--diagnostics", action="store_true", help="include grid diagnostics")
    return parser


def _config(args, n, diagnostics):
    density = None
    if args.density is not None:
        text = args.density
        if not text.lstrip().startswith("{"):
            try:
                text = Path(text).read_text()
            except OSError as exc:
                raise UsageError(f"cannot read density file: {exc}")
        try:
            density = json.loads(text)
        except json.JSONDecodeError as exc:
            raise UsageError(f"density is not valid JSON: {exc}")
    try:
        return ExperimentConfig(n=n, dim=args.dim, k=args.k, t=args.t, replicates=args.reps,
                                epsilon=args.epsilon, density=density, master_seed=args.seed,
                                chenstein_diagnostics=diagnostics)
    except (ValueError, KeyError, TypeError) as exc:
        raise UsageError(str(exc)) from exc


def _out_dir(args):
    return Path(args.out or os.environ.get(OUT_ENV) or "results")


def _emit(args, payload, lines):
    if args.json:
        print(json.dumps(payload, indent=2))
    else:
        print("\n".join(lines))


def _cmd_volume(args):
    if args.radius <= 0:
        raise UsageError("--radius must be positive")
    if args.center is not None:
        if len(args.center) != args.dim:
            raise UsageError(f"--center has {len(args.center)} coordinates, expected {args.dim}")
        vol = ball_box_volume(args.center, args.radius)
        _emit(args, {"dim": args.dim, "center": args.center, "radius": args.radius,
                     "ball_box_volume": vol},
              [f"ball/cube volume: {vol:.10g}"])
        return 0
    if args.distance is None:
        raise UsageError("--distance or --center is required")
    if args.distance < 0:
        raise UsageError("--distance must be nonnegative")
    exact = union_two_balls_exact(args.dim, args.radius, args.distance)
    payload = {"dim": args.dim, "radius": args.radius, "distance": args.distance,
               "exact": exact}
    lines = [f"union volume (exact): {exact:.10g}"]
    if args.paper_formula:
        if args.radius != 1.0:
            raise UsageError("--paper-formula needs --radius 1")
        if args.dim < 2 or args.distance > 2:
            raise UsageError("--paper-formula needs --dim >= 2 and --distance <= 2")
        paper = union_two_balls_paper_formula(args.dim, args.distance)
        payload["paper_formula"] = paper
        payload["relative_gap"] = (paper - exact) / exact
        lines.append(f"union volume (planar closed form): {paper:.10g}")
        lines.append(f"relative gap: {(paper - exact) / exact:.3e}")
    _emit(args, payload, lines)
    return 0


def _cmd_expectation(args):
    try:
        v = threshold(args.n, args.k, args.t)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    e = expected_count(args.n, args.k, args.t)
    target = math.exp(-args.t)
    _emit(args, {"n": args.n, "k": args.k, "t": args.t, "threshold": v,
                 "expected_count": e, "target": target, "gap": e - target},
          [f"v = {v:.8f}", f"E[C] = {e:.6f}", f"target exp(-t) = {target:.6f}",
           f"gap = {e - target:.6f}"])
    return 0


def _summary_lines(report, paths):
    cfg = report.config
    lines = [
        f"n={cfg.n} dim={cfg.dim} k={cfg.k} t={cfg.t} replicates={cfg.replicates}",
        f"mean count = {report.mean_count:.4f} +- {report.se_count:.4f} "
        f"(exact expectation {report.expected_count:.4f})",
        f"TV to Poisson = {report.tv_to_poisson:.4f} (bootstrap SE {report.tv_se:.4f})",
        f"KS to Gumbel = {report.ks_to_gumbel:.4f}",
    ]
    diag = report.diagnostics
    if diag is not None:
        lines.append(f"b1 = {diag.b1:.4g}, b2 = {diag.b2:.4g}, bound = {diag.bound:.4g}, "
                     f"mismatch rate = {diag.mismatch_rate:.4f}, "
                     f"occupancy failures = {diag.occupancy_failure_rate:.4f}")
    lines.append(f"runtime = {report.runtime_seconds:.1f} s")
    lines += [f"wrote {p}" for p in paths]
    return lines


def _cmd_run(args, diagnostics):
    config = _config(args, args.n, diagnostics)
    report = run_experiment(config, workers=args.workers or os.cpu_count())
    stem = "chenstein" if diagnostics else "simulate"
    paths = list(persist(report, _out_dir(args), stem=stem))
    if diagnostics:
        diag_path = _out_dir(args) / f"{stem}_diagnostics.json"
        try:
            diag_path.write_text(json.dumps(report.diagnostics.to_json(), indent=2) + "\n")
        except OSError as exc:
            raise OSError(f"cannot write {diag_path}: {exc}") from exc
        paths.append(diag_path)
    _emit(args, report.to_json(), _summary_lines(report, paths))
    return 0


def _cmd_sweep(args):
    configs = [_config(args, n, args.diagnostics) for n in sorted(set(args.n_list))]
    if len(configs) != len(args.n_list):
        raise UsageError("--n-list contains duplicates")
    out = _out_dir(args)
    reports, lines = [], []
    for cfg in configs:
        report = run_experiment(cfg, workers=args.workers or os.cpu_count())
        persist(report, out, stem=f"sweep_n{cfg.n}")
        reports.append(report)
        lines.append(f"n={cfg.n}: mean={report.mean_count:.4f} TV={report.tv_to_poisson:.4f} "
                     f"KS={report.ks_to_gumbel:.4f}")
    path = write_sweep_csv(reports, out / "sweep.csv")
    lines.append(f"wrote {path}")
    _emit(args, [r.to_json() for r in reports], lines)
    return 0


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except SystemExit as exc:
        # --help
        return exc.code or 0
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    handlers = {"volume": _cmd_volume, "geometry": _cmd_volume,
                "expectation": _cmd_expectation,
                "simulate": lambda a: _cmd_run(a, False),
                "chenstein": lambda a: _cmd_run(a, True),
                "sweep": _cmd_sweep}
    try:
        return handlers[args.command](args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
