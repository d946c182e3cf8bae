"""Command-line driver ``peg``.

Exit codes: 0 success, 2 the curve is not embedded, 3 topology or orbit
integrity failure, 4 bad arguments.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import time

import numpy as np

from .curve import CurveError, NotEmbeddedError, check_embedded, load_curve, make_ellipse, perturb
from .geometry import GeometryError
from .intersection import TopologyError, perturb_diagonal_count, topology_block
from .report import (dumps_report, orbit_rows, plot_doubling, plot_pegs, plot_scan, read_report,
                     write_report, write_rows, write_svg)
from .residual import Problem
from .solver import OrbitIntegrityError, SolveConfig, default_workers, solve
from .sweep import family_members, scan_phi, verify_doubling

log = logging.getLogger("peglab")

EXIT_OK = 0
EXIT_NOT_EMBEDDED = 2
EXIT_TOPOLOGY = 3
EXIT_BAD_ARGS = 4

RIGHT_ANGLE = "right-angle"
DEFAULT_DOUBLING_PHIS = (0.3, 0.7, 1.1, 1.5)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_BAD_ARGS, f"{self.prog}: error: {message}\n")


def parse_angle(text: str):
    """Radians as a float, or the literal ``right-angle``.  Degree notation is refused."""
    s = text.strip().lower()
    if s == RIGHT_ANGLE:
        return RIGHT_ANGLE
    if s.endswith(("deg", "degree", "degrees", "°")):
        raise argparse.ArgumentTypeError(f"{text!r}: angles are in radians; degrees are not accepted")
    try:
        val = float(s)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not a number of radians or 'right-angle'")
    if not math.isfinite(val):
        raise argparse.ArgumentTypeError(f"{text!r} is not finite")
    return val


def _positive_int(text):
    v = int(text)
    if v <= 0:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="peg", description="Inscribed rectangles and cyclic quadrilaterals in Fourier curves.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def curve_args(sp, required=True):
        g = sp.add_mutually_exclusive_group(required=required)
        g.add_argument("--curve", metavar="FILE", help="curve JSON file")
        g.add_argument("--ellipse", nargs=2, type=float, metavar=("A", "B"))
        sp.add_argument("--amplitude", type=float, default=0.0, help="random Fourier perturbation size")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--max-mode", type=_positive_int, default=5)

    def solver_args(sp):
        sp.add_argument("--grid", type=_positive_int, default=SolveConfig.grid_per_axis)
        sp.add_argument("--workers", type=_positive_int, default=None,
                        help="process count (default: PEGLAB_WORKERS or CPU count)")

    def problem_args(sp):
        sp.add_argument("--phi", type=parse_angle, help="radians or 'right-angle'")
        sp.add_argument("--quad", action="store_true", help="cyclic quadrilateral with --s --t --phi")
        sp.add_argument("--s", type=float)
        sp.add_argument("--t", type=float)

    f = sub.add_parser("find", help="find all pegs of one shape")
    curve_args(f)
    problem_args(f)
    solver_args(f)
    f.add_argument("--out", metavar="FILE", help="report JSON (default: stdout)")
    f.add_argument("--svg", metavar="FILE")
    f.add_argument("--csv", metavar="FILE", help="one row per orbit")
    f.add_argument("--png", metavar="FILE", help="matplotlib figure of the pegs")
    f.add_argument("--timing", action="store_true", help="include wall-clock timing in the report")

    d = sub.add_parser("verify-doubling", help="orbit counts over a perturbed family")
    curve_args(d)
    solver_args(d)
    d.add_argument("--phi", type=parse_angle, action="append", help="repeatable")
    d.add_argument("--family-size", type=_positive_int, default=20)
    d.add_argument("--out", metavar="FILE")
    d.add_argument("--csv", metavar="FILE")
    d.add_argument("--png", metavar="FILE")

    s = sub.add_parser("scan-phi", help="orbit counts and peg paths along phi")
    curve_args(s)
    solver_args(s)
    s.add_argument("--phi-min", type=parse_angle, default=0.1)
    s.add_argument("--phi-max", type=parse_angle, default=1.5)
    s.add_argument("--steps", type=_positive_int, default=15)
    s.add_argument("--out", metavar="FILE")
    s.add_argument("--csv", metavar="FILE")
    s.add_argument("--png", metavar="FILE")

    c = sub.add_parser("check-curve", help="embedding check")
    curve_args(c)
    c.add_argument("--samples", type=_positive_int, default=512)
    c.add_argument("--out", metavar="FILE")

    t = sub.add_parser("topology", help="signed count and Euler ledger")
    curve_args(t, required=False)
    problem_args(t)
    solver_args(t)
    t.add_argument("--report", metavar="FILE", help="use an existing report instead of solving")
    t.add_argument("--epsilon", type=float, default=None, help="also count zeros near the diagonal")
    t.add_argument("--global-sign", type=int, choices=(-1, 1), default=1)
    t.add_argument("--out", metavar="FILE")
    return p


# --- config assembly ---------------------------------------------------------

def curve_from_args(args):
    if args.curve:
        curve = load_curve(args.curve)
    elif args.ellipse:
        curve = make_ellipse(*args.ellipse)
    else:
        raise UsageError("need --curve FILE or --ellipse A B")
    if args.amplitude:
        curve = perturb(curve, args.amplitude, args.max_mode, args.seed)
    return curve


def config_from_args(args) -> SolveConfig:
    workers = args.workers if args.workers is not None else default_workers()
    return SolveConfig(grid_per_axis=args.grid, workers=workers)


def rect_problem(phi) -> Problem:
    if phi == RIGHT_ANGLE:
        return Problem.rectangle(right_angle=True)
    if not (0 < phi <= math.pi / 2):
        raise UsageError(f"rectangle phi must lie in (0, pi/2] radians, got {phi}")
    return Problem.rectangle(phi)


def problem_from_args(args) -> Problem:
    if args.phi is None:
        raise UsageError("--phi is required")
    if not args.quad:
        if args.s is not None or args.t is not None:
            raise UsageError("--s/--t need --quad")
        return rect_problem(args.phi)
    if args.s is None or args.t is None:
        raise UsageError("--quad needs --s and --t")
    if not (0 < args.s <= 0.5 and 0 < args.t <= 0.5):
        raise UsageError("--s and --t must lie in (0, 1/2]")
    if args.phi == RIGHT_ANGLE:
        return Problem.quad(args.s, args.t, right_angle=True)
    if not (0 < args.phi < math.pi):
        raise UsageError(f"quadrilateral phi must lie in (0, pi) radians, got {args.phi}")
    return Problem.quad(args.s, args.t, args.phi)


def _emit(obj, path):
    text = json.dumps(obj, indent=2, sort_keys=True) + "\n"
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# --- commands ----------------------------------------------------------------

def cmd_find(args) -> int:
    curve = curve_from_args(args)
    problem = problem_from_args(args)
    report = solve(curve, problem, config_from_args(args))
    log.info("solved in %.2fs: %d orbits, %d raw", report.timing["total"], len(report.orbits),
             report.raw_solution_count)
    for w in report.warnings:
        log.warning(w)
    if args.out:
        write_report(report, args.out, args.timing)
    else:
        sys.stdout.write(dumps_report(report, args.timing) + "\n")
    if args.svg:
        write_svg(report, args.svg)
    if args.csv:
        write_rows(args.csv, *orbit_rows(report))
    if args.png:
        plot_pegs(report, args.png)
    return EXIT_OK


def cmd_verify_doubling(args) -> int:
    base = curve_from_args(argparse.Namespace(**{**vars(args), "amplitude": 0.0}))
    curves = family_members(base, args.amplitude, args.family_size, args.seed, args.max_mode)
    phis = args.phi or list(DEFAULT_DOUBLING_PHIS)
    problems = [rect_problem(p) for p in phis]
    summary = verify_doubling(curves, problems, config_from_args(args))
    out = summary.to_json()
    _emit(out, args.out)
    if args.csv:
        keys = ["member", "phi", "right_angle", "orbits", "raw", "signed_total", "transverse",
                "euler_chi", "doubling_certificate", "fingerprint"]
        write_rows(args.csv, keys, ([r[k] for k in keys] for r in summary.rows))
    if args.png:
        plot_doubling(summary.rows, args.png)
    log.info("min orbit count %s over %d runs, %d degenerate", summary.min_orbits, len(summary.rows),
             len(summary.degenerate_runs))
    return EXIT_OK


def cmd_scan_phi(args) -> int:
    curve = curve_from_args(args)
    if RIGHT_ANGLE in (args.phi_min, args.phi_max):
        raise UsageError("scan range must lie inside (0, pi/2); use find for the right angle")
    phis = np.linspace(args.phi_min, args.phi_max, args.steps)
    trace = scan_phi(curve, phis, config_from_args(args))
    _emit(trace.to_json(), args.out)
    if args.csv:
        write_rows(args.csv, ["phi", "orbits", "fresh_solve"],
                   ([p, n, p in trace.fresh_solves] for p, n in zip(trace.phis, trace.counts)))
    if args.png:
        plot_scan(trace.phis, trace.counts, args.png, trace.first_vertex_paths())
    return EXIT_OK


def cmd_check_curve(args) -> int:
    curve = curve_from_args(args)
    verdict = check_embedded(curve, n_samples=args.samples)
    out = {"fingerprint": curve.fingerprint(), "max_mode": curve.max_mode, **verdict.to_json()}
    _emit(out, args.out)
    return EXIT_OK if verdict.embedded else EXIT_NOT_EMBEDDED


def cmd_topology(args) -> int:
    if args.report:
        report = read_report(args.report)
        curve = report.get_curve()
    else:
        curve = curve_from_args(args)
        report = solve(curve, problem_from_args(args), config_from_args(args))
    try:
        block = topology_block(report, args.global_sign, strict=True)
        status = EXIT_OK
    except TopologyError as exc:
        log.error("%s", exc)
        block = topology_block(report, args.global_sign, strict=False)
        block["error"] = str(exc)
        status = EXIT_TOPOLOGY
    if args.epsilon is not None and status == EXIT_OK:
        verdict = perturb_diagonal_count(curve, report.problem, args.epsilon, report=report, strict=False)
        block["diagonal_perturbation"] = verdict.to_json()
        if not verdict.ok:
            status = EXIT_TOPOLOGY
    report.topology = block
    if args.out:
        write_report(report, args.out)
    else:
        sys.stdout.write(dumps_report(report) + "\n")
    return status


COMMANDS = {
    "find": cmd_find,
    "verify-doubling": cmd_verify_doubling,
    "scan-phi": cmd_scan_phi,
    "check-curve": cmd_check_curve,
    "topology": cmd_topology,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    t0 = time.perf_counter()
    try:
        code = COMMANDS[args.command](args)
    except NotEmbeddedError as exc:
        print(f"peg: curve not embedded: {exc}", file=sys.stderr)
        if exc.verdict is not None:
            print(json.dumps(exc.verdict.to_json()), file=sys.stderr)
        return EXIT_NOT_EMBEDDED
    except (OrbitIntegrityError, TopologyError, GeometryError) as exc:
        print(f"peg: {exc}", file=sys.stderr)
        return EXIT_TOPOLOGY
    except (UsageError, CurveError, ValueError, FileNotFoundError,
            json.JSONDecodeError, KeyError) as exc:
        print(f"peg: error: {exc}", file=sys.stderr)
        return EXIT_BAD_ARGS
    log.info("%s finished in %.2fs", args.command, time.perf_counter() - t0)
    return code


if __name__ == "__main__":
    sys.exit(main())
