"""Command-line front end.

Exit codes: 0 success, 1 quantization check failed, 2 usage or input error,
3 numerical failure, 4 search found nothing (budget exhausted or structurally
impossible target).
"""
from __future__ import annotations

import argparse
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction

from .fields import FormatError, TrigPoly, ZERO, format_trigpoly, read_trigpoly
from .flow import (DEFAULT_TOL, IntegrationError, NonMonotoneError, TorusODE, flow_map)
from .output import RunManifest, atomic_write, slices_csv, slices_svg

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_NUMERIC, EXIT_NOT_FOUND = 0, 1, 2, 3, 4


class UsageError(Exception):
    pass


def _version() -> str:
    try:
        from importlib.metadata import version
        return version("phaselock")
    except Exception:
        return "0+unknown"


def _load_poly(path) -> TrigPoly:
    if path is None:
        return ZERO
    try:
        return read_trigpoly(path)
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror or exc}") from None
    except FormatError as exc:
        raise UsageError(str(exc)) from None


def _rho(text: str) -> tuple[int, int]:
    try:
        fr = Fraction(text.strip())
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"invalid rotation number {text!r}, expected p/q")
    return fr.numerator, fr.denominator


def _float_list(text: str) -> list:
    parts = [s for s in text.replace(",", " ").split() if s]
    try:
        return [float(s) for s in parts]
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid number list {text!r}")


def _fmt_rational(r) -> str:
    return "none" if r is None else f"{r[0]}/{r[1]}"


# subcommands ----------------------------------------------------------------

def cmd_rotnum(args) -> int:
    from .rotation import detect_rational, rotation_number_map, rotation_number_ode
    v, f = _load_poly(args.field), _load_poly(args.forcing)
    ode = TorusODE(v, args.A, args.B, f)
    if args.method == "ode":
        est = rotation_number_ode(ode, args.periods, args.tol)
    else:
        g = flow_map(ode, args.n, args.tol)
        if args.map_csv:
            atomic_write(args.map_csv, g.to_csv())
        est = rotation_number_map(g, args.iterations)
    if args.method == "ode" and args.map_csv:
        atomic_write(args.map_csv, flow_map(ode, args.n, args.tol).to_csv())
    print(f"rho = {est.value!r}")
    print(f"error_bound = {est.error_bound:.3e}")
    print(f"rational = {_fmt_rational(detect_rational(est, args.qmax))}")
    return EXIT_OK


def _scan_one(job):
    from .tongues import scan_diagram
    v, f, A_range, B, kw = job
    return scan_diagram(v, f, A_range, [B], **kw).slices


def _scan(args, witness=True):
    v, f = _load_poly(args.field), _load_poly(args.forcing)
    kw = dict(qmax=args.qmax, tol_A=args.tol_A, n=args.n, tol=args.tol)
    if witness:
        kw.update(include_points=args.include_points)
    else:
        kw.update(witness=False)
    jobs = [(v, f, tuple(args.A_range), B, kw) for B in args.B_list]
    if args.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            parts = list(pool.map(_scan_one, jobs))
    else:
        parts = [_scan_one(j) for j in jobs]
    return v, f, [s for part in parts for s in part]


def cmd_scan(args) -> int:
    _, _, slices = _scan(args)
    text = slices_csv(slices)
    if args.out:
        atomic_write(args.out, text)
    else:
        sys.stdout.write(text)
    if args.svg:
        atomic_write(args.svg, slices_svg(slices, args.A_range, args.B_list))
    return EXIT_OK


def cmd_quantize_check(args) -> int:
    from .fields import is_special_form
    from .tongues import QuantizationReport
    v = _load_poly(args.field)
    sf = is_special_form(v)
    if not sf.special:
        print("verdict = N/A")
        print("reason = field has two or more harmonic degrees")
        return EXIT_OK
    _, _, slices = _scan(args, witness=False)
    wide = [s for s in slices if s.width > args.width_floor]
    bad = wide if sf.m is None else [s for s in wide if (s.rho * sf.m).denominator != 1]
    rep = QuantizationReport(True, sf.m, not bad, args.width_floor, slices, bad)
    if args.out:
        atomic_write(args.out, slices_csv(slices))
    print(f"verdict = {rep.verdict}")
    print(f"m = {rep.m}")
    print(f"wide_slices = {len(wide)}")
    for s in bad:
        print(f"violation = {s.p}/{s.q} B={s.B!r} width={s.width!r}")
    return EXIT_OK if rep.passed else EXIT_FAIL


def cmd_word_eval(args) -> int:
    from .groupwords import eval_word, parse_word
    from .rotation import detect_rational, find_periodic_orbit, rotation_number_map
    try:
        with open(args.word) as fh:
            w = parse_word(fh.read(), args.word)
    except OSError as exc:
        raise UsageError(f"cannot read {args.word}: {exc.strerror or exc}") from None
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    v = _load_poly(args.field)
    g = eval_word(w, v, args.n, args.tol)
    est = rotation_number_map(g, args.iterations)
    r = detect_rational(est, args.qmax)
    print(f"level = {w.level()!r}")
    print(f"rho = {est.value!r}")
    print(f"error_bound = {est.error_bound:.3e}")
    print(f"rational = {_fmt_rational(r)}")
    if r is not None:
        orbit = find_periodic_orbit(g, *r)
        if orbit is not None:
            print(f"orbit_x0 = {orbit.x0!r}")
            print(f"multiplier = {orbit.multiplier!r}")
    return EXIT_OK


def cmd_word_search(args) -> int:
    from .groupwords import format_word, search_hyperbolic_word
    v = _load_poly(args.field)
    p, q = args.rho
    res = search_hyperbolic_word(v, p, q, args.k, args.budget, args.seed, args.tau_min,
                                 args.threshold)
    if res is None:
        print(f"not found: no hyperbolic word for {p}/{q} within {args.budget} evaluations")
        return EXIT_NOT_FOUND
    if args.out:
        atomic_write(args.out, format_word(res.word))
    else:
        sys.stdout.write(format_word(res.word))
    print(f"multiplier = {res.orbit.multiplier!r}")
    print(f"orbit_x0 = {res.orbit.x0!r}")
    print(f"evaluations = {res.evaluations}")
    return EXIT_OK


def cmd_synth(args) -> int:
    from .forcing import SynthesisOptions, synthesize_forcing
    v = _load_poly(args.field)
    p, q = args.rho
    opts = SynthesisOptions(seed=args.seed, budget=args.budget,
                            word_lengths=tuple(args.k) if args.k else None, tol=args.tol,
                            sigma_max=args.sigma_max, N_max=args.N_max)
    f, rep = synthesize_forcing(v, p, q, opts)
    atomic_write(args.out + ".report", rep.to_text())
    if f is not None:
        atomic_write(args.out + ".forcing", format_trigpoly(f))
        print(f"rho = {rep.rho}")
        print(f"N = {rep.N}")
        print(f"multiplier = {rep.multiplier!r}")
        return EXIT_OK
    print(f"failed at stage {rep.stage}: {'; '.join(rep.diagnostics)}")
    return EXIT_NOT_FOUND if rep.stage in ("special-form", "word-search") else EXIT_NUMERIC


# parser ---------------------------------------------------------------------

def _common(sp, n_default=1024):
    sp.add_argument("--tol", type=float, default=DEFAULT_TOL, help="integrator tolerance")
    sp.add_argument("--n", type=int, default=n_default, help="flow-map grid size")
    sp.add_argument("--manifest", help="run manifest path (default: next to the output)")


def _scan_args(sp):
    sp.add_argument("field")
    sp.add_argument("forcing")
    sp.add_argument("--A-range", dest="A_range", type=float, nargs=2, default=[-3.0, 3.0],
                    metavar=("A_MIN", "A_MAX"))
    sp.add_argument("--B-list", dest="B_list", type=_float_list, default=[1.0],
                    help="comma-separated B values")
    sp.add_argument("--qmax", type=int, default=5)
    sp.add_argument("--tol-A", dest="tol_A", type=float, default=1e-6)
    sp.add_argument("--jobs", type=int, default=1, help="parallel processes over B")
    _common(sp, n_default=64)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="phaselock", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=_version())
    sub = ap.add_subparsers(dest="subcommand", required=True)

    sp = sub.add_parser("rotnum", help="rotation number of one family member")
    sp.add_argument("field")
    sp.add_argument("forcing", nargs="?")
    sp.add_argument("-A", type=float, default=0.0)
    sp.add_argument("-B", type=float, default=0.0)
    sp.add_argument("--method", choices=("map", "ode"), default="map")
    sp.add_argument("--periods", type=int, default=256, help="periods for --method ode")
    sp.add_argument("--iterations", type=int, default=2048, help="map iterations")
    sp.add_argument("--qmax", type=int, default=64)
    sp.add_argument("--map-csv", dest="map_csv", help="dump the period map as CSV")
    _common(sp)
    sp.set_defaults(func=cmd_rotnum)

    sp = sub.add_parser("scan", help="phase-lock slices over an A-range for each B")
    _scan_args(sp)
    sp.add_argument("--out", help="CSV output (stdout if omitted)")
    sp.add_argument("--svg", help="SVG tongue diagram")
    sp.add_argument("--include-points", dest="include_points", action="store_true")
    sp.set_defaults(func=cmd_scan)

    sp = sub.add_parser("quantize-check", help="check wide slices sit at multiples of 1/m")
    _scan_args(sp)
    sp.add_argument("--width-floor", dest="width_floor", type=float, default=1e-3)
    sp.add_argument("--out", help="CSV of all slices")
    sp.set_defaults(func=cmd_quantize_check)

    sp = sub.add_parser("word-eval", help="rotation number of a group word")
    sp.add_argument("word")
    sp.add_argument("field")
    sp.add_argument("--iterations", type=int, default=2048)
    sp.add_argument("--qmax", type=int, default=64)
    _common(sp)
    sp.set_defaults(func=cmd_word_eval)

    sp = sub.add_parser("word-search", help="search a hyperbolic word with given rotation")
    sp.add_argument("field")
    sp.add_argument("--rho", type=_rho, required=True)
    sp.add_argument("--k", type=int, default=2)
    sp.add_argument("--budget", type=int, default=400)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--tau-min", dest="tau_min", type=float, default=0.05)
    sp.add_argument("--threshold", type=float, default=1e-2)
    sp.add_argument("--out", help="word file (stdout if omitted)")
    sp.add_argument("--manifest")
    sp.set_defaults(func=cmd_word_search)

    sp = sub.add_parser("synth", help="synthesize a trigonometric forcing for a rational")
    sp.add_argument("field")
    sp.add_argument("--rho", type=_rho, required=True)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--budget", type=int, default=400)
    sp.add_argument("--k", type=int, nargs="+", help="word lengths to try")
    sp.add_argument("--tol", type=float, default=DEFAULT_TOL)
    sp.add_argument("--sigma-max", dest="sigma_max", type=float, default=3.141592653589793)
    sp.add_argument("--N-max", dest="N_max", type=int, default=512)
    sp.add_argument("--out", required=True, help="output prefix for .forcing and .report")
    sp.add_argument("--manifest")
    sp.set_defaults(func=cmd_synth)

    sp = sub.add_parser("rerun", help="repeat a run from its manifest")
    sp.add_argument("manifest_file")
    sp.add_argument("--out", help="override the output path")
    sp.add_argument("--svg", help="override the SVG path")
    sp.set_defaults(func=None)
    return ap


_COMMANDS = {"rotnum": cmd_rotnum, "scan": cmd_scan, "quantize-check": cmd_quantize_check,
             "word-eval": cmd_word_eval, "word-search": cmd_word_search, "synth": cmd_synth}
_PATH_ARGS = ("field", "forcing", "word")
_SKIP = ("func", "manifest", "subcommand")


def _resolved(args) -> dict:
    out = {}
    for k, v in vars(args).items():
        if k in _SKIP:
            continue
        if k in _PATH_ARGS and v is not None:
            v = os.path.abspath(v)
        if isinstance(v, tuple):
            v = list(v)
        out[k] = v
    return out


def _manifest_path(args):
    if getattr(args, "manifest", None):
        return args.manifest
    out = getattr(args, "out", None)
    if out:
        return out + ".manifest"
    if getattr(args, "map_csv", None):
        return args.map_csv + ".manifest"
    return None


def _from_manifest(args):
    try:
        m = RunManifest.read(args.manifest_file)
    except OSError as exc:
        raise UsageError(f"cannot read {args.manifest_file}: {exc.strerror or exc}") from None
    except ValueError as exc:
        raise UsageError(f"{args.manifest_file}: {exc}") from None
    if m.subcommand not in _COMMANDS:
        raise UsageError(f"{args.manifest_file}: unknown subcommand {m.subcommand!r}")
    ns = argparse.Namespace(**m.params)
    if "rho" in m.params and m.params["rho"] is not None:
        ns.rho = tuple(m.params["rho"])
    for key in ("out", "svg"):
        if getattr(args, key, None):
            setattr(ns, key, getattr(args, key))
    ns.subcommand, ns.func, ns.manifest = m.subcommand, _COMMANDS[m.subcommand], None
    return ns


def run(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        if args.subcommand == "rerun":
            args = _from_manifest(args)
        start = time.perf_counter()
        code = args.func(args)
        path = _manifest_path(args)
        if path:
            seed = getattr(args, "seed", None)
            RunManifest(args.subcommand, _resolved(args), seed, _version(),
                        time.perf_counter() - start).write(path)
        return code
    except UsageError as exc:
        print(f"phaselock: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (IntegrationError, NonMonotoneError, ArithmeticError, RuntimeError) as exc:
        print(f"phaselock: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:  # rejected parameter values
        print(f"phaselock: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"phaselock: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
