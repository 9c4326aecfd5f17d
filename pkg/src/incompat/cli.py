"""Command-line entry point: ``incompat <subcommand> ...``.

Exit codes: 0 success, 1 usage or input error, 2 solver failure,
3 experiment targets not met.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import angles, core, criteria, harness, sampling, sdp, spectra
from .errors import IncompatError, SolverFailure

EXIT_OK, EXIT_USAGE, EXIT_SOLVER, EXIT_TARGET = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _global_flags(p, suppress: bool):
    """Global flags; subparsers repeat them with SUPPRESS so they work on either side."""
    defaults = {"seed": 0, "output": None, "format": "csv"}
    dflt = (lambda k: argparse.SUPPRESS) if suppress else defaults.get
    p.add_argument("--seed", type=int, default=dflt("seed"), help="base seed (default 0)")
    p.add_argument("--output", default=dflt("output"), help="output file (default stdout)")
    p.add_argument("--format", choices=("csv", "json"), default=dflt("format"), help="output format")


# -- output ----------------------------------------------------------------------

def _open_out(args):
    if args.output:
        Path(args.output).parent.mkdir(parents=True, exist_ok=True)
        return open(args.output, "w", newline="")
    return sys.stdout


def _emit_rows(args, rows: list[dict], columns: list[str] | None = None):
    columns = columns or (list(rows[0]) if rows else [])
    fh = _open_out(args)
    try:
        if args.format == "json":
            json.dump(harness._jsonable(rows), fh, indent=1)
            fh.write("\n")
        else:
            w = csv.DictWriter(fh, fieldnames=columns, lineterminator="\n")
            w.writeheader()
            for r in rows:
                w.writerow({c: harness._fmt(r.get(c)) for c in columns})
    finally:
        if fh is not sys.stdout:
            fh.close()


def _emit_json(args, obj):
    fh = _open_out(args)
    try:
        json.dump(harness._jsonable(obj), fh, indent=1)
        fh.write("\n")
    finally:
        if fh is not sys.stdout:
            fh.close()


def _read_set(path) -> core.MeasurementSet:
    text = sys.stdin.read() if path == "-" else Path(path).read_text()
    obj = core.loads(text)
    return obj if isinstance(obj, core.MeasurementSet) else core.measurement_set([obj])


def _parse_pauli(text: str) -> int:
    key, _, val = text.partition("=")
    if key != "g" or not val.isdigit():
        raise UsageError(f"--pauli expects g=<int>, got {text!r}")
    return int(val)


# -- subcommands -----------------------------------------------------------------

def cmd_sample(args):
    rng = sampling.SeededRng(args.seed, args.stream)
    d, kind = args.d, args.kind
    povms = []
    for _ in range(args.count):
        if kind == "projection":
            rank = args.rank if args.rank is not None else d // 2
            povms.append(core.povm_of(sampling.random_dichotomic(d, rank, rng)))
        elif kind == "basis":
            povms.append(sampling.random_basis_measurement(d, rng))
        elif kind == "induced":
            povms.append(sampling.random_induced_povm(d, args.k, args.n, rng))
    if kind == "pauli":
        povms = [o.povm() for o in core.pauli_basis(args.count)]
    _emit_json(args, core.measurement_set_to_dict(core.measurement_set(povms)))
    return EXIT_OK


def cmd_tau(args):
    if args.pauli:
        obs = core.pauli_basis(_parse_pauli(args.pauli))
        br = sdp.tau_dichotomic(obs)
    elif args.input:
        mset = _read_set(args.input)
        method = args.method
        if method == "auto":
            method = "lambda" if all(k == 2 for k in mset.outcome_counts) else "bisection"
        if method == "lambda":
            br = sdp.tau_dichotomic([core.observable_of(p) for p in mset.povms])
        elif method == "bisection":
            br = sdp.tau_general(mset, tol=args.tol)
        else:
            rep = sdp.tau_direct(mset)
            br = sdp.TauBracket(min(1.0, rep.value), min(1.0, rep.value), "sdp:direct", "sdp:direct", rep.value)
    else:
        raise UsageError("tau needs --pauli g=<int> or --input <set.json>")
    _emit_rows(args, [br.to_dict()])
    return EXIT_OK


def cmd_witness(args):
    mset = _read_set(args.input)
    cert = sdp.witness_search(mset)
    if args.format == "json":
        _emit_json(args, cert.to_dict())
    else:
        _emit_rows(args, [{"pairing": cert.pairing, "certifies_incompatibility": cert.certifies}])
    return EXIT_OK


def cmd_criteria(args):
    mset = _read_set(args.input)
    rows = [b.to_dict() for b in criteria.applicable_bounds(mset)]
    _emit_rows(args, rows, ["value", "kind", "source", "applicability", "tight"])
    return EXIT_OK


def cmd_angles(args):
    rng = sampling.SeededRng(args.seed, 0)
    d = args.d
    ra, rb = int(math.floor(args.alpha * d)), int(math.floor(args.beta * d))
    vals = []
    for _ in range(args.trials):
        E = sampling.random_subspace(d, ra, rng)
        F = sampling.random_subspace(d, rb, rng)
        vals.append(angles.principal_angles(E, F).angles)
    vals = np.concatenate(vals) if vals else np.zeros(0)
    counts, edges = np.histogram(vals, bins=args.bins, range=(0.0, math.pi / 2))
    rows = [
        {"bin": i, "lo": float(edges[i]), "hi": float(edges[i + 1]), "count": int(c)}
        for i, c in enumerate(counts)
    ]
    _emit_rows(args, rows)
    return EXIT_OK


def _law_rows(law: spectra.SpectralLaw, n: int):
    lo, hi = law.support
    # cell midpoints keep inverse-square-root edges finite
    xs = lo + (np.arange(n) + 0.5) * (hi - lo) / n
    dens = law.density(xs)
    cdf = law.cdf(xs)
    return [{"x": float(x), "density": float(f), "cdf": float(c)} for x, f, c in zip(xs, dens, cdf)]


def cmd_spectra(args):
    law_name = args.law
    if law_name == "kesten-mckay":
        rows = _law_rows(spectra.kesten_mckay(args.g), args.grid)
    elif law_name == "nu":
        law = spectra.nu_kc(args.k, args.c)
        rows = _law_rows(law, args.grid)
        for loc, m in law.atoms:
            rows.append({"x": loc, "density": None, "cdf": None, "atom_mass": m})
    elif law_name == "angles":
        law = spectra.angle_cos2_law(args.alpha, args.beta)
        rows = []
        for r in _law_rows(law, args.grid):
            theta = math.acos(math.sqrt(r["x"]))
            # push forward to angles: f_theta = f_x * |dx/dtheta|
            rows.append({"theta": theta, "density": r["density"] * math.sin(2 * theta), "cdf": 1 - r["cdf"]})
        rows.reverse()
    elif law_name == "thresholds":
        ks = np.unique(np.round(np.geomspace(2, args.k_max, args.grid)).astype(int))
        rows = [dict(k=int(k), **spectra.induced_thresholds(int(k), args.g).to_dict()) for k in ks]
    elif law_name == "moments":
        rows = [
            {
                "d": args.d,
                "p": p,
                "exact": float(spectra.haar_projection_moment(args.d, p)),
                "bound": spectra.moment_bound(args.d, p) if p % 2 == 0 else 0.0,
            }
            for p in range(args.p_max + 1)
        ]
    else:  # pragma: no cover - argparse restricts choices
        raise UsageError(law_name)
    columns = None
    if law_name == "nu":
        columns = ["x", "density", "cdf", "atom_mass"]
    _emit_rows(args, rows, columns)
    return EXIT_OK


def cmd_experiment(args):
    if args.list:
        for name in sorted(harness.EXPERIMENTS):
            print(name)
        return EXIT_OK
    if not args.config:
        raise UsageError("experiment needs --config <file or name>")
    cfg = harness.ExperimentConfig.load(args.config)
    if "seed" in args and args.seed_given:
        cfg.seed = args.seed
    report = harness.run_experiment(cfg, workers=args.workers, write=False)
    base = args.output or cfg.output_path or cfg.experiment
    jpath, cpath = report.write(base)
    for t in report.targets:
        status = "PASS" if t["passed"] else "FAIL"
        print(f"{status} {t['name']}: {t['reduce']}({t['column']}) = {t['value']} {t['op']} {t['threshold']}")
    print(f"report: {jpath} ({cpath}); excluded {report.excluded}; {report.wall_clock:.1f}s")
    return EXIT_OK if report.passed else EXIT_TARGET


# -- parser ----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="incompat", description="Quantum measurement (in)compatibility toolkit.")
    _global_flags(p, suppress=False)
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    s = sub.add_parser("sample", help="sample a random measurement set as JSON")
    _global_flags(s, True)
    s.add_argument("kind", choices=("projection", "basis", "induced", "pauli"))
    s.add_argument("--d", type=int, default=2)
    s.add_argument("--rank", type=int)
    s.add_argument("--k", type=int, default=2)
    s.add_argument("--n", type=int, default=1)
    s.add_argument("--count", type=int, default=2, help="number of POVMs (g for pauli)")
    s.add_argument("--stream", type=int, default=0)
    s.set_defaults(func=cmd_sample)

    s = sub.add_parser("tau", help="compatibility degree")
    _global_flags(s, True)
    s.add_argument("--pauli", metavar="g=N")
    s.add_argument("--input", help="MeasurementSet JSON file ('-' for stdin)")
    s.add_argument("--method", choices=("auto", "lambda", "bisection", "direct"), default="auto")
    s.add_argument("--tol", type=float, default=1e-4)
    s.set_defaults(func=cmd_tau)

    s = sub.add_parser("witness", help="optimal incompatibility witness")
    _global_flags(s, True)
    s.add_argument("--input", required=True)
    s.set_defaults(func=cmd_witness)

    s = sub.add_parser("criteria", help="table of applicable bounds")
    _global_flags(s, True)
    s.add_argument("--input", required=True)
    s.set_defaults(func=cmd_criteria)

    s = sub.add_parser("angles", help="principal-angle histogram of random subspaces")
    _global_flags(s, True)
    s.add_argument("--d", type=int, default=100)
    s.add_argument("--alpha", type=float, default=0.5)
    s.add_argument("--beta", type=float, default=0.5)
    s.add_argument("--trials", type=int, default=1)
    s.add_argument("--bins", type=int, default=20)
    s.set_defaults(func=cmd_angles)

    s = sub.add_parser("spectra", help="tabulate reference laws and threshold curves")
    _global_flags(s, True)
    s.add_argument("law", choices=("kesten-mckay", "nu", "angles", "thresholds", "moments"))
    s.add_argument("--g", type=int, default=2)
    s.add_argument("--k", type=int, default=2)
    s.add_argument("--c", type=float, default=0.25)
    s.add_argument("--alpha", type=float, default=0.5)
    s.add_argument("--beta", type=float, default=0.5)
    s.add_argument("--grid", type=int, default=101)
    s.add_argument("--k-max", type=int, default=1000)
    s.add_argument("--d", type=int, default=4)
    s.add_argument("--p-max", type=int, default=6)
    s.set_defaults(func=cmd_spectra)

    s = sub.add_parser("experiment", help="run a seeded Monte-Carlo experiment")
    _global_flags(s, True)
    s.add_argument("--config", help="config file, or a shipped config name")
    s.add_argument("--workers", type=int, default=None)
    s.add_argument("--list", action="store_true")
    s.set_defaults(func=cmd_experiment)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    args.seed_given = "--seed" in argv
    if not getattr(args, "command", None):
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    for name in ("grid", "bins", "trials", "count"):
        if getattr(args, name, 1) is not None and getattr(args, name, 1) < 1:
            print(f"incompat: error: --{name} must be >= 1", file=sys.stderr)
            return EXIT_USAGE
    try:
        return args.func(args)
    except SolverFailure as exc:
        print(f"incompat: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (UsageError, IncompatError, OSError, json.JSONDecodeError, KeyError) as exc:
        print(f"incompat: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
