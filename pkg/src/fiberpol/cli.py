"""Command-line entry point: ``fiberpol <subcommand> ...``.

Exit codes: 0 success, 2 file or schema error, 3 domain error,
4 ill-posed or ambiguous result.
"""
import argparse
import csv
import io
import json
import sys
from pathlib import Path

import numpy as np

from . import core
from .decomposition import analyze_fiber, extract_retardances, lu_chipman
from .errors import AmbiguityError, DomainError, FiberpolError, IllPosedError, SchemaError
from .fiber import (
    StandardRandom, beat_length, calibrate, eigen_axis, model_from_dict, noise_budget,
    propagate, required_analyzer, scrambling_ensemble,
)
from .fixtures import generate_fixture
from .psg import table1_states
from .report import AnalysisReport
from .retrieval import estimate_mueller, propagate_uncertainty, read_measurements, write_measurements_csv

EXIT_OK, EXIT_SCHEMA, EXIT_DOMAIN, EXIT_ILLPOSED = 0, 2, 3, 4


def _fmt(x):
    return f"{x:.17g}"


def _load_json_arg(value, what):
    """Inline JSON, or the path of a JSON file."""
    text = value
    p = Path(value)
    if not value.lstrip().startswith(("{", "[")):
        try:
            text = p.read_text()
        except OSError as exc:
            raise SchemaError(f"cannot read {what} file {value}: {exc}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"invalid {what} JSON: {exc}") from exc


def _stokes_arg(value):
    if value in core.STATES:
        return core.STATES[value].copy()
    try:
        return core.stokes_from_json(_load_json_arg(value, "Stokes"))
    except DomainError as exc:
        raise SchemaError(str(exc)) from exc


def _model_arg(value):
    obj = _load_json_arg(value, "model")
    if not isinstance(obj, dict):
        raise SchemaError("model JSON must be an object {\"variant\": ..., \"params\": {...}}")
    return model_from_dict(obj)


def _emit(text, out):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _dumps(obj):
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


# -- subcommands ------------------------------------------------------------------------

def cmd_psg(args):
    rows = table1_states()
    if args.format == "json":
        text = _dumps([{"label": lab, "lcvr1_waves": r1, "lcvr2_waves": r2,
                        "stokes": [round(float(x), 12) + 0.0 for x in s]}
                       for lab, r1, r2, s in rows])
    else:
        lines = [f"{'state':<6}{'LCVR-1':>8}{'LCVR-2':>8}   stokes"]
        for lab, r1, r2, s in rows:
            vec = " ".join(f"{round(float(x), 12) + 0.0:+.3f}" for x in s)
            lines.append(f"{lab:<6}{r1:>8.2f}{r2:>8.2f}   {vec}")
        text = "\n".join(lines) + "\n"
    _emit(text, args.out)


def cmd_simulate(args):
    model = _model_arg(args.model)
    s_in = _stokes_arg(args.input)
    traj = propagate(model, s_in, args.length, args.wavelength, args.dz)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["z", "s0", "s1", "s2", "s3"])
    for z, s in zip(traj.z, traj.states):
        w.writerow([_fmt(z), *(_fmt(x) for x in s)])
    _emit(buf.getvalue(), args.out)
    if args.plot:
        from .plotting import plot_trajectory

        axis = None if isinstance(model, StandardRandom) else eigen_axis(model, args.length, args.wavelength)
        plot_trajectory(traj, args.plot, eigen_axis=axis, title=type(model).__name__)


def cmd_ensemble(args):
    model = _model_arg(args.model)
    if not isinstance(model, StandardRandom):
        raise DomainError("ensemble requires a StandardRandom model")
    stats = scrambling_ensemble(model, args.length, args.wavelength, _stokes_arg(args.input),
                                args.n, seed=args.seed)
    out = stats.to_dict()
    out["seed"] = args.seed
    _emit(_dumps(out), args.out)
    if args.plot:
        from .plotting import plot_ensemble

        plot_ensemble(stats, args.plot)


def cmd_reconstruct(args):
    mset = read_measurements(args.input)
    est = estimate_mueller(mset)
    mc = propagate_uncertainty(mset, args.resamples, seed=args.seed)
    out = {
        "m": core.mueller_to_json(est.m),
        "element_sigma": core.mueller_to_json(mc),
        "element_sigma_linear": core.mueller_to_json(est.element_sigma),
        "condition_number": est.condition_number,
        "labels": mset.labels(),
        "seed": args.seed,
        "resamples": args.resamples,
    }
    _emit(_dumps(out), args.out)


def cmd_decompose(args):
    m = core.mueller_from_json(_load_json_arg(args.matrix, "matrix"))
    dec = lu_chipman(m)
    out = {
        "m_diatten": core.mueller_to_json(dec.m_diatten),
        "m_retard": core.mueller_to_json(dec.m_retard),
        "m_depol": core.mueller_to_json(dec.m_depol),
        "diattenuation": dec.diattenuation,
        "depolarization_factor": dec.depolarization_factor,
        "degenerate": dec.degenerate,
    }
    if not dec.degenerate:
        ret = extract_retardances(dec.m_retard)
        out["retardance"] = {"delta_total": ret.delta_total, "delta_cb": ret.delta_cb,
                             "delta_lb": ret.delta_lb, "fast_axis": ret.fast_axis}
    _emit(_dumps(out), args.out)


def cmd_pipeline(args):
    mset = read_measurements(args.input, wavelength=args.wavelength, fiber_length=args.length)
    analysis = analyze_fiber(mset, args.prior_cb, args.prior_lb,
                             n_resamples=args.resamples, seed=args.seed)
    config = {"input": Path(args.input).name, "lambda": args.wavelength, "length": args.length,
              "prior_cb": args.prior_cb, "prior_lb": args.prior_lb, "resamples": args.resamples}
    report = AnalysisReport.from_analysis(analysis, config=config, seed=args.seed)
    _emit(report.text_summary() + "\n" if args.format == "text" else report.to_json(), args.out)
    if args.plot:
        from .plotting import plot_report

        plot_report(report, args.plot)


def cmd_plan(args):
    model = _model_arg(args.model)
    phi = None
    if args.calibrate and not isinstance(model, StandardRandom):
        bright = _stokes_arg(args.calibrate)
        phi = calibrate(model, args.length, args.wavelength, bright)
    plan = required_analyzer(model, args.length, args.wavelength, phi=phi)
    out = {
        "analyzer_axis": None if plan.analyzer_axis is None else [float(x) for x in plan.analyzer_axis],
        "analyzer_kind": plan.analyzer_kind,
        "extra_noise_units": plan.extra_noise_units,
        "phi": phi,
        "note": plan.note,
    }
    if not isinstance(model, StandardRandom):
        out["eigen_axis"] = [float(x) for x in eigen_axis(model, args.length, args.wavelength)]
    _emit(_dumps(out), args.out)


def cmd_penalty(args):
    _emit(f"{noise_budget(args.observables)}\n", args.out)


def cmd_beat_length(args):
    _emit(f"{_fmt(beat_length(args.wavelength, args.bm))}\n", args.out)


def cmd_fixture(args):
    model = _model_arg(args.model)
    mset = generate_fixture(model, args.length, args.wavelength, args.noise, args.repeats, args.seed)
    buf = io.StringIO()
    write_measurements_csv(mset, buf)
    _emit(buf.getvalue(), args.out)


# -- parser -----------------------------------------------------------------------------

def _common(p, length=False, seed=False, wavelength=True):
    if wavelength:
        p.add_argument("--lambda", dest="wavelength", type=float, default=808e-9,
                       help="wavelength in metres (default 808e-9)")
    if length:
        p.add_argument("--length", type=float, required=True, help="fiber length in metres")
    if seed:
        p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", help="output file (default: stdout)")


def build_parser():
    parser = argparse.ArgumentParser(prog="fiberpol", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("psg", help="print the six-state generator table")
    _common(p, wavelength=False)
    p.add_argument("--format", choices=["json", "text"], default="text")
    p.set_defaults(func=cmd_psg)

    p = sub.add_parser("simulate", help="propagate a state along a fiber model")
    _common(p, length=True)
    p.add_argument("--model", required=True, help="model JSON (inline or file)")
    p.add_argument("--input", required=True, help="Stokes JSON, file, or label H/V/D/A/+/-")
    p.add_argument("--dz", type=float, required=True)
    p.add_argument("--plot", help="write a Poincare-sphere figure to this file")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("ensemble", help="scrambling statistics over random fibers")
    _common(p, length=True, seed=True)
    p.add_argument("--model", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--input", default="H")
    p.add_argument("--plot")
    p.set_defaults(func=cmd_ensemble)

    p = sub.add_parser("reconstruct", help="estimate a Mueller matrix from measurements")
    _common(p, seed=True, wavelength=False)
    p.add_argument("--input", required=True)
    p.add_argument("--resamples", type=int, default=1000)
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("decompose", help="Lu-Chipman decomposition of a Mueller matrix")
    _common(p, wavelength=False)
    p.add_argument("--matrix", required=True, help="row-major 16-element JSON (inline or file)")
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("pipeline", help="full birefringence analysis of a measurement file")
    _common(p, length=True, seed=True)
    p.add_argument("--input", required=True)
    p.add_argument("--prior-cb", type=float, required=True)
    p.add_argument("--prior-lb", type=float, required=True)
    p.add_argument("--resamples", type=int, default=200)
    p.add_argument("--format", choices=["json", "text"], default="json")
    p.add_argument("--plot", help="write a Mueller-matrix figure to this file")
    p.set_defaults(func=cmd_pipeline)

    p = sub.add_parser("plan", help="analyzer and noise penalty for a fiber model")
    _common(p, length=True)
    p.add_argument("--model", required=True)
    p.add_argument("--calibrate", help="bright reference state (Stokes JSON, file or label)")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("penalty", help="extra quantum-noise units for N joint observables")
    _common(p, wavelength=False)
    p.add_argument("--observables", type=int, required=True)
    p.set_defaults(func=cmd_penalty)

    p = sub.add_parser("beat-length", help="mode beat length lambda / B_m")
    _common(p)
    p.add_argument("--bm", type=float, required=True)
    p.set_defaults(func=cmd_beat_length)

    p = sub.add_parser("fixture", help="synthetic six-state measurement CSV")
    _common(p, length=True, seed=True)
    p.add_argument("--model", required=True)
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--repeats", type=int, default=400)
    p.set_defaults(func=cmd_fixture)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except (SchemaError, OSError) as exc:
        print(f"fiberpol: error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except (IllPosedError, AmbiguityError) as exc:
        print(f"fiberpol: error: {exc}", file=sys.stderr)
        return EXIT_ILLPOSED
    except (DomainError, FiberpolError) as exc:
        print(f"fiberpol: error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
