"""Command-line front end: fit, run, analytic, dispersion, compare.

Exit codes: 0 success, 2 validation error (bad arguments, bad scenario,
bad input files), 3 numerical abort during time stepping.  The output
directory may be overridden with the VISCOWAVE_OUTPUT_DIR environment
variable; no other behavior is environment-dependent.
"""

from __future__ import annotations

import argparse
import math
import os
import sys

import numpy as np

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3


def _band_from(args):
    from .qfit import FitBand

    f1, f2 = args.band
    return FitBand(2.0 * math.pi * f1, 2.0 * math.pi * f2)


def cmd_fit(args) -> int:
    from . import qfit

    band = _band_from(args)
    if args.method == "gmb":
        rheo, report = qfit.fit_gmb(lambda w: 1.0 / args.Q, band, args.L)
    elif args.method == "pade":
        rheo, report = qfit.fit_pade(args.Q, band, args.L)
    else:
        rheo, report = qfit.fit_tau(args.Q, qfit.log_equidistant(band, args.L), band)
    print(f"# method={report.method} L={report.L} "
          f"band_rad_s=[{band.omega1:.6g}, {band.omega2:.6g}]")
    print(f"# max_rel_error={report.max_rel_error:.4e} "
          f"rms_rel_error={report.rms_rel_error:.4e} "
          f"negative_weights={report.negative_weights}")
    print("# l, y_l, omega_l")
    for l, (y, w) in enumerate(rheo.mechanisms, start=1):
        print(f"{l}, {y:.17g}, {w:.17g}")
    return EXIT_OK


def cmd_run(args) -> int:
    from .runner import run
    from .scenario import parse_scenario

    with open(args.scenario) as fh:
        sc = parse_scenario(fh.read(), base_dir=os.path.dirname(os.path.abspath(args.scenario)))
    out_dir = os.environ.get("VISCOWAVE_OUTPUT_DIR", args.output_dir)
    result = run(sc, output_dir=out_dir)
    print(f"steps={result.manifest['n_steps']} dt={result.manifest['dt']:.6g} "
          f"wall={result.manifest['wall_time_s']:.2f}s")
    for path in result.manifest["traces"]:
        print(path)
    return EXIT_OK


def cmd_analytic(args) -> int:
    from .oracle import TraceSet, analytic_trace_1d, cylinder_trace, save_trace_csv
    from .material import KjartanssonModel, kjartansson_modulus
    from .source import Wavelet

    out_dir = os.environ.get("VISCOWAVE_OUTPUT_DIR", args.output_dir)
    os.makedirs(out_dir, exist_ok=True)
    if args.kind == "pulse":
        w = Wavelet("two_sine", T=args.T) if args.wavelet == "two_sine" else Wavelet("ricker", f0=args.f0)
        omega_ref = 2.0 * math.pi * args.ref_frequency
        model = KjartanssonModel(1.0, omega_ref, args.Q)
        ts = analytic_trace_1d(w, args.t_star, args.Q, omega_ref,
                               lambda om: kjartansson_modulus(model, om), args.dt, args.n,
                               t_shift=args.t_shift)
        path = os.path.join(out_dir, "pulse.csv")
        save_trace_csv(ts, 0, path)
        print(path)
        return EXIT_OK
    from .scenario import parse_scenario
    from .runner import build, resolve_wavelet
    from .oracle import CylinderScene

    with open(args.scenario) as fh:
        sc = parse_scenario(fh.read(), base_dir=os.path.dirname(os.path.abspath(args.scenario)))
    if len(sc.regions) != 2 or sc.regions[1].shape != "circle" or sc.source.kind != "plane_wave":
        raise ValueError("cylinder oracle needs background + circle regions and a plane_wave source")
    setup = build(sc)
    bg, circ = sc.regions
    scene = CylinderScene(circ.params[2], bg.rho, bg.c, bg.Q, circ.rho, circ.c, circ.Q,
                          sc.source.angle, sc.source.amplitude,
                          circ.omega_ref if circ.omega_ref is not None else 2.0 * math.pi * sc.source.f0)
    n = 1
    while n * setup.dt < 2.0 * sc.t_end or n & (n - 1):
        n += max(1, n)
    receivers = tuple((x, y) for _, x, y in sc.receivers)
    ts = cylinder_trace(scene, setup.wavelet, receivers, setup.dt, n,
                        phase_origin=setup.injection.phase_point)
    for ri, (name, _, _) in enumerate(sc.receivers):
        path = os.path.join(out_dir, f"analytic_{name}.csv")
        save_trace_csv(ts, ri, path)
        print(path)
    return EXIT_OK


def cmd_dispersion(args) -> int:
    from . import qfit
    from .dispersion import sweep_curves
    from .material import Rheology

    if args.Q is None:
        rheo = Rheology(1.0, 1.0)
    else:
        band = _band_from(args)
        rheo, _ = qfit.fit_gmb(lambda w: 1.0 / args.Q, band, args.L)
    points = sweep_curves(rheo, args.N, angles=[a * math.pi for a in args.angles],
                          cfl_fraction=args.cfl_fraction, dim=args.dim)
    print("# N, angle, q, attenuation_ratio")
    for p in points:
        print(f"{p.N:.17g}, {p.angle:.17g}, {p.q:.17g}, {p.attenuation_ratio:.17g}")
    return EXIT_OK


def cmd_compare(args) -> int:
    from .oracle import correlation, l2_misfit, load_trace_csv

    t_a, _, cols_a = load_trace_csv(args.a)
    t_b, _, cols_b = load_trace_csv(args.b)
    if len(t_a) != len(t_b):
        raise ValueError("trace lengths differ (resampling is not applied)")
    if len(t_a) > 1 and abs((t_a[1] - t_a[0]) - (t_b[1] - t_b[0])) > 1e-12 * t_a[1]:
        raise ValueError("sampling intervals differ (resampling is not applied)")
    ok = True
    for i, (a, b) in enumerate(zip(cols_a, cols_b)):
        corr = correlation(a, b)
        misfit = l2_misfit(a, b)
        verdict = ""
        if args.min_correlation is not None or args.max_misfit is not None:
            passed = ((args.min_correlation is None or corr >= args.min_correlation)
                      and (args.max_misfit is None or misfit <= args.max_misfit))
            ok = ok and passed
            verdict = " PASS" if passed else " FAIL"
        print(f"column {i}: correlation={corr:.6f} l2_misfit={misfit:.6f}{verdict}")
    return EXIT_OK if ok else EXIT_VALIDATION


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="viscowave",
                                description="viscoacoustic wave simulation toolkit")
    sub = p.add_subparsers(dest="command", required=True)

    f = sub.add_parser("fit", help="fit relaxation mechanisms to a constant Q")
    f.add_argument("--Q", type=float, required=True)
    f.add_argument("--method", choices=("gmb", "pade", "tau"), default="gmb")
    f.add_argument("--L", type=int, default=3)
    f.add_argument("--band", type=float, nargs=2, metavar=("F1", "F2"),
                   default=(10**-1.5, 10**1.5), help="band in Hz")
    f.set_defaults(func=cmd_fit)

    r = sub.add_parser("run", help="run a scenario file")
    r.add_argument("scenario")
    r.add_argument("--output-dir", default=None)
    r.set_defaults(func=cmd_run)

    a = sub.add_parser("analytic", help="emit closed-form reference traces")
    a.add_argument("--kind", choices=("pulse", "cylinder"), default="pulse")
    a.add_argument("--scenario", help="scenario file (cylinder kind)")
    a.add_argument("--wavelet", choices=("ricker", "two_sine"), default="two_sine")
    a.add_argument("--f0", type=float, default=2.5)
    a.add_argument("--T", type=float, default=0.3)
    a.add_argument("--Q", type=float, default=20.0)
    a.add_argument("--t-star", type=float, default=1.0)
    a.add_argument("--t-shift", type=float, default=0.0,
                   help="delay applied to keep the dispersed pulse inside the window")
    a.add_argument("--ref-frequency", type=float, default=1.0, help="Hz")
    a.add_argument("--dt", type=float, default=1e-3)
    a.add_argument("--n", type=int, default=1 << 15)
    a.add_argument("--output-dir", default="out")
    a.set_defaults(func=cmd_analytic)

    d = sub.add_parser("dispersion", help="numerical dispersion/attenuation table")
    d.add_argument("--Q", type=float, default=None, help="omit for elastic")
    d.add_argument("--L", type=int, default=3)
    d.add_argument("--band", type=float, nargs=2, metavar=("F1", "F2"),
                   default=(10**-1.5, 10**1.5))
    d.add_argument("--N", type=float, nargs="+", default=(5, 10, 20, 40, 80))
    d.add_argument("--angles", type=float, nargs="+", default=(0.0, 0.25),
                   help="in units of pi")
    d.add_argument("--cfl-fraction", type=float, default=0.95)
    d.add_argument("--dim", type=int, choices=(1, 2), default=2)
    d.set_defaults(func=cmd_dispersion)

    c = sub.add_parser("compare", help="correlation and misfit between trace CSVs")
    c.add_argument("a")
    c.add_argument("b", help="reference")
    c.add_argument("--min-correlation", type=float, default=None)
    c.add_argument("--max-misfit", type=float, default=None)
    c.set_defaults(func=cmd_compare)
    return p


def main(argv=None) -> int:
    from .oracle import SynthesisError
    from .scenario import ScenarioError
    from .solver import NumericalAbort

    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except NumericalAbort as exc:
        print(f"numerical abort: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ScenarioError, SynthesisError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
