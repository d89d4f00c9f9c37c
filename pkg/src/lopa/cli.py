"""Command-line front end.

Exit codes: 0 when the requested condition holds, 1 when it fails, 2 for
invalid input.  Every subcommand prints either an aligned text summary or
(with ``--json``) the full report.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from typing import Sequence

import numpy as np

from . import catalog as cat
from .errors import (CharacteristicBoundary, DegenerateSplitting, DimensionMismatch,
                     EllipticityFailure, HyperbolicBlockCharacteristic, Infeasible, InvalidGrid,
                     InvalidWeights, LopaError, LopatinskiSingular, NotNegativeOnKernel,
                     RankDeficient, SchemaError, StructuralFailure, WrongBoundaryCount)
from .lopatinski import uniform_scan
from .profile import ExponentialProfile
from .report import build_report, dumps, render_text
from .resolvent import resolvent_matrix, solve_resolvent, stable_subspace
from .stability import (direct_vs_decomposed, kreiss_constant, proposition_main_decompose,
                        stability_grid)
from .symmetrizer import (adjoint_forward_form, build_dissipative_bc,
                          check_maximal_dissipativity, find_symmetrizer)
from .system import (BoundarySymbol, Frequency, check_hyperbolicity, decode_vector,
                     encode_matrix, encode_vector, parse_system, serialize_system,
                     validate_system)
from . import viscous as visc

EXIT_PASS, EXIT_FAIL, EXIT_INVALID = 0, 1, 2


class UsageError(Exception):
    pass


# -- input helpers -------------------------------------------------------------

def load_document(ref: str) -> dict:
    """A system document from a file path or a catalog reference ``@name[:bc]``."""
    if ref.startswith("@"):
        return cat.resolve_reference(ref)
    if not os.path.exists(ref):
        raise UsageError(f"no such file: {ref}")
    try:
        with open(ref, encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise UsageError(f"{ref}: invalid JSON ({exc})") from None


def _json_arg(text: str | None, what: str):
    """A JSON literal, or the contents of a file when ``text`` names one."""
    if text is None:
        return None
    if os.path.exists(text):
        with open(text, encoding="utf-8") as fh:
            text = fh.read()
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise UsageError(f"{what}: invalid JSON ({exc})") from None


def _eta(text: str | None, d: int) -> tuple:
    if text is None or text == "":
        vals = []
    elif text.strip().startswith("["):
        vals = _json_arg(text, "--eta")
    else:
        vals = [float(x) for x in text.split(",")]
    if len(vals) != d - 1:
        raise UsageError(f"--eta needs {d - 1} components, got {len(vals)}")
    return tuple(float(v) for v in vals)


def _frequency(args, d: int) -> Frequency:
    if not args.gamma > 0:
        raise UsageError("--gamma must be positive")
    return Frequency(args.tau, _eta(args.eta, d), args.gamma)


def _hyperbolic(doc):
    if visc.is_viscous_document(doc):
        raise UsageError("this subcommand expects a first-order system document")
    return parse_system(doc)


def _viscous(doc):
    if not visc.is_viscous_document(doc):
        raise UsageError("this subcommand expects a second-order system document")
    return visc.parse_second_order(doc)


def _need_boundary(boundary):
    if boundary is None:
        raise UsageError("the document has no 'boundary' field")
    return boundary


def _constant_matrix(boundary):
    if not boundary.constant:
        raise UsageError("this subcommand needs a constant boundary matrix")
    return boundary.matrix


# -- subcommands -------------------------------------------------------------
# Each returns (verdict, exit code, result dict, checks dict).

def cmd_validate(args, doc):
    if visc.is_viscous_document(doc):
        sys2, _ = visc.parse_second_order(doc)
        try:
            rep = visc.validate_second_order(sys2)
        except (StructuralFailure, EllipticityFailure, HyperbolicBlockCharacteristic,
                CharacteristicBoundary) as exc:
            return "fail", EXIT_FAIL, {"error": type(exc).__name__, "message": str(exc)}, {}
        return "pass", EXIT_PASS, rep.to_json(), rep.checks
    system, _ = parse_system(doc)
    try:
        val = validate_system(system)
    except CharacteristicBoundary as exc:
        return "fail", EXIT_FAIL, {"error": "CharacteristicBoundary", "message": str(exc),
                                   "sigma_min": exc.sigma_min}, {"noncharacteristic": "fail"}
    hyp = check_hyperbolicity(system, sphere_samples=args.samples)
    checks = {"noncharacteristic": "pass", "hyperbolicity": "pass" if hyp.passed else "fail"}
    result = {"validation": val.to_json(), "hyperbolicity": hyp.to_json()}
    ok = hyp.passed
    return ("pass" if ok else "fail"), (EXIT_PASS if ok else EXIT_FAIL), result, checks


def cmd_symmetrizer(args, doc):
    system, _ = _hyperbolic(doc)
    try:
        S = find_symmetrizer(system, iterations=args.iterations)
    except Infeasible as exc:
        return "infeasible", EXIT_FAIL, {"message": str(exc),
                                         "best_lambda_min": exc.best_lambda_min}, {}
    return "found", EXIT_PASS, {"S": encode_matrix(S.S), "residual": S.residual,
                                "lambda_min": S.lambda_min}, {}


def cmd_dissipative_bc(args, doc):
    system, boundary = _hyperbolic(doc)
    try:
        S = find_symmetrizer(system, iterations=args.iterations)
    except Infeasible as exc:
        return "infeasible", EXIT_FAIL, {"message": str(exc)}, {"symmetrizer": "infeasible"}
    try:
        tg = build_dissipative_bc(S, system)
    except DegenerateSplitting as exc:
        return "fail", EXIT_FAIL, {"message": str(exc)}, {"splitting": "fail"}
    cert = check_maximal_dissipativity(S, system, tg, seed=args.seed)
    result = {"S": encode_matrix(S.S), "tilde_gamma": encode_matrix(tg) if tg.size else [],
              "certificate": cert.to_json()}
    checks = {"built": "valid" if cert.valid else "invalid"}
    ok = cert.valid
    if boundary is not None:
        try:
            given = check_maximal_dissipativity(S, system, _constant_matrix(boundary),
                                                seed=args.seed)
            result["supplied_certificate"] = given.to_json()
            checks["supplied"] = "valid" if given.valid else "invalid"
            ok = ok and given.valid
        except (NotNegativeOnKernel, WrongBoundaryCount, RankDeficient) as exc:
            result["supplied_certificate"] = {"error": type(exc).__name__, "message": str(exc)}
            checks["supplied"] = "not dissipative"
            ok = False
    return ("pass" if ok else "fail"), (EXIT_PASS if ok else EXIT_FAIL), result, checks


def _scan(system, boundary, args):
    return uniform_scan(system, boundary, gamma_min=args.gamma_min, resolution=args.resolution,
                        radial_cutoff=args.radial_cutoff, tol=args.tol, workers=args.workers)


def cmd_adjoint(args, doc):
    system, boundary = _hyperbolic(doc)
    gm = _constant_matrix(_need_boundary(boundary))
    star, gstar = adjoint_forward_form(system, gm)
    bstar = BoundarySymbol.from_matrix(gstar, system.n)
    result = {"adjoint_document": serialize_system(star, bstar)}
    checks = {}
    if args.scan:
        fwd = _scan(system, boundary, args)
        adj = _scan(star, bstar, args)
        result["forward_scan"] = fwd.to_json()
        result["adjoint_scan"] = adj.to_json()
        checks = {"forward": fwd.verdict, "adjoint": adj.verdict}
        ok = adj.holds
        return ("holds" if ok else adj.verdict), (EXIT_PASS if ok else EXIT_FAIL), result, checks
    return "pass", EXIT_PASS, result, checks


def cmd_lopatinski(args, doc):
    system, boundary = _hyperbolic(doc)
    res = _scan(system, _need_boundary(boundary), args)
    return res.verdict, (EXIT_PASS if res.holds else EXIT_FAIL), res.to_json(), {}


def _forcing(args, n):
    items = _json_arg(args.f, "--f") or []
    f = ExponentialProfile.from_json(items, n)
    return f


def _datum(args, k):
    items = _json_arg(args.g, "--g")
    if items is None:
        return np.zeros(k, dtype=complex)
    return decode_vector(items, k, "--g")


def cmd_solve(args, doc):
    system, boundary = _hyperbolic(doc)
    boundary = _need_boundary(boundary)
    freq = _frequency(args, system.d)
    f = _forcing(args, system.n)
    g = _datum(args, boundary.k)
    Gm = resolvent_matrix(system, freq)
    stable, _ = stable_subspace(Gm, system.n_plus())
    try:
        sol = solve_resolvent(Gm, boundary(freq), f, g, stable)
    except LopatinskiSingular as exc:
        return "fail", EXIT_FAIL, {"message": str(exc), "sigma": exc.sigma}, {}
    u = sol.u
    result = {"frequency": freq.to_json(), "u": u.to_json(), "norm": u.norm(),
              "trace": encode_vector(u.trace()), "trace_norm": float(np.linalg.norm(u.trace())),
              "sigma": sol.sigma, "boundary_residual": sol.boundary_residual,
              "equation_residual": sol.relative_equation_residual()}
    return "pass", EXIT_PASS, result, {}


def _grid(args, d):
    freqs = stability_grid(d, (args.gamma_lo, args.gamma_hi), args.n_gamma, args.resolution)
    meta = {"gamma_range": [args.gamma_lo, args.gamma_hi], "n_gamma": args.n_gamma,
            "resolution": args.resolution, "points": len(freqs)}
    return freqs, meta


def cmd_kreiss(args, doc):
    system, boundary = _hyperbolic(doc)
    boundary = _need_boundary(boundary)
    freqs, meta = _grid(args, system.d)
    rep = kreiss_constant(system, boundary, freqs, args.trials, args.seed, args.cap,
                          args.workers, meta)
    ok = rep.verdict == "uniformly stable on grid"
    return rep.verdict, (EXIT_PASS if ok else EXIT_FAIL), rep.to_json(), {}


def cmd_decompose(args, doc):
    system, boundary = _hyperbolic(doc)
    boundary = _need_boundary(boundary)
    freq = _frequency(args, system.d)
    f = _forcing(args, system.n)
    g = _datum(args, boundary.k)
    try:
        S = find_symmetrizer(system)
    except Infeasible as exc:
        return "infeasible", EXIT_FAIL, {"message": str(exc)}, {"symmetrizer": "infeasible"}
    tg = _json_arg(args.tilde_gamma, "--tilde-gamma")
    if tg is not None:
        from .system import decode_matrix
        tg = decode_matrix(tg, (len(tg), system.n), "--tilde-gamma")
    gm = boundary(freq)
    try:
        trace = proposition_main_decompose(system, S, gm, f, g, freq, tg, check=False)
        comp = direct_vs_decomposed(system, S, gm, f, g, freq, tg)
    except LopatinskiSingular as exc:
        return "fail", EXIT_FAIL, {"message": str(exc), "sigma": exc.sigma}, {}
    result = trace.to_json()
    result["comparison"] = comp.to_json()
    checks = {i.name: ("pass" if i.holds() else "fail") for i in trace.inequalities}
    checks["direct vs decomposed"] = "pass" if comp.relative_error <= 1e-8 else "fail"
    ok = all(v == "pass" for v in checks.values())
    return ("pass" if ok else "fail"), (EXIT_PASS if ok else EXIT_FAIL), result, checks


DEFAULT_VISCOUS_BOX = {"gamma": [0.1, 10.0, 5], "tau": [-5.0, 5.0, 9], "eta": [-5.0, 5.0, 5]}


def _viscous_freqs(args, d):
    spec = _json_arg(args.grid_file, "--grid-file") if args.grid_file else DEFAULT_VISCOUS_BOX
    return visc.frequency_set(spec, d), spec


def _viscous_boundary(sys2, boundary):
    boundary = _need_boundary(boundary)
    if boundary.n not in (sys2.n, sys2.reduced_dim):
        raise UsageError(f"boundary must have {sys2.n} or {sys2.reduced_dim} columns")
    return boundary


def cmd_viscous_evans(args, doc):
    sys2, boundary = _viscous(doc)
    boundary = _viscous_boundary(sys2, boundary)
    freqs, spec = _viscous_freqs(args, sys2.d)
    res = visc.evans_scan(sys2, boundary, freqs, tol=args.tol, workers=args.workers)
    out = res.to_json()
    out["frequency_set"] = spec
    return res.verdict, (EXIT_PASS if res.holds else EXIT_FAIL), out, {}


def cmd_viscous_kreiss(args, doc):
    sys2, boundary = _viscous(doc)
    boundary = _viscous_boundary(sys2, boundary)
    if not boundary.constant:
        raise UsageError("viscous-kreiss needs a constant boundary matrix")
    freqs, spec = _viscous_freqs(args, sys2.d)
    weights = visc.Weights.from_json(_json_arg(args.weights, "--weights")) if args.weights \
        else visc.Weights()
    rep = visc.viscous_stability_check(sys2, boundary.matrix, freqs, args.trials, args.seed,
                                       weights, args.cap, args.workers)
    out = rep.to_json()
    out["frequency_set"] = spec
    out["note"] = "weights are user-supplied placeholders; ratios are empirical"
    ok = rep.verdict == "uniformly stable on grid"
    return rep.verdict, (EXIT_PASS if ok else EXIT_FAIL), out, {}


def cmd_catalog(args, _doc):
    if args.name is None:
        entries = [{"name": e.name, "kind": e.kind, "boundaries": sorted(e.boundaries),
                    "expected": e.expected, "description": e.description}
                   for e in cat.catalog()]
        return "pass", EXIT_PASS, {"entries": entries}, {}
    params = {}
    for p in args.param or []:
        key, eq, val = p.partition("=")
        if not eq:
            raise UsageError(f"--param {p!r} must look like key=value")
        params[key] = val
    e = cat.entry(args.name, **params)
    return "pass", EXIT_PASS, {"entry": e.to_json(),
                               "document": e.with_boundary(args.boundary)}, {}


# -- parser ------------------------------------------------------------------

def _positive(conv):
    def check(text):
        v = conv(text)
        if not v > 0:
            raise argparse.ArgumentTypeError(f"must be positive, got {text}")
        return v
    return check


def _resolution(text):
    v = int(text)
    if v < 2:
        raise argparse.ArgumentTypeError("resolution must be at least 2")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--json", action="store_true", help="emit the JSON report")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--workers", type=_positive(int), default=1)
    common.add_argument("--output", help="also write the JSON report to this file")

    scan = argparse.ArgumentParser(add_help=False)
    scan.add_argument("--gamma-min", type=_positive(float), default=1e-3)
    scan.add_argument("--resolution", type=_resolution, default=16)
    scan.add_argument("--radial-cutoff", type=_positive(float), default=1e3)
    scan.add_argument("--tol", type=_positive(float), default=1e-8)

    freq = argparse.ArgumentParser(add_help=False)
    freq.add_argument("--tau", type=float, default=0.0)
    freq.add_argument("--eta", default=None, help="tangential frequency, comma separated")
    freq.add_argument("--gamma", type=float, default=1.0)
    freq.add_argument("--f", default=None, help="forcing terms as JSON [{v, mu, m}, ...]")
    freq.add_argument("--g", default=None, help="boundary datum as a JSON vector")

    trials = argparse.ArgumentParser(add_help=False)
    trials.add_argument("--trials", type=int, default=20)
    trials.add_argument("--cap", type=_positive(float), default=1e6)

    p = argparse.ArgumentParser(prog="lopa", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, parents, fn, needs_input=True, **kw):
        sp = sub.add_parser(name, parents=[common, *parents], **kw)
        if needs_input:
            sp.add_argument("input", help="system document path or @catalog-entry[:boundary]")
        sp.set_defaults(fn=fn, needs_input=needs_input)
        return sp

    sp = add("validate", [], cmd_validate, help="check hyperbolicity or parabolic structure")
    sp.add_argument("--samples", type=int, default=200)
    sp = add("symmetrizer", [], cmd_symmetrizer, help="search for a Friedrichs symmetrizer")
    sp.add_argument("--iterations", type=int, default=500)
    sp = add("dissipative-bc", [], cmd_dissipative_bc,
             help="build and certify a maximally dissipative boundary matrix")
    sp.add_argument("--iterations", type=int, default=500)
    sp = add("adjoint", [scan], cmd_adjoint, help="adjoint problem in forward form")
    sp.add_argument("--scan", action="store_true", help="scan forward and adjoint problems")
    add("lopatinski", [scan], cmd_lopatinski, help="uniform Lopatinski scan")
    add("solve", [freq], cmd_solve, help="solve the resolvent problem at one frequency")
    sp = add("kreiss", [trials], cmd_kreiss, help="empirical uniform stability constant")
    sp.add_argument("--gamma-lo", type=_positive(float), default=1e-3)
    sp.add_argument("--gamma-hi", type=_positive(float), default=1e3)
    sp.add_argument("--n-gamma", type=_positive(int), default=7)
    sp.add_argument("--resolution", type=_resolution, default=3)
    sp = add("decompose", [freq], cmd_decompose, help="auxiliary/residual decomposition")
    sp.add_argument("--tilde-gamma", default=None, help="reference boundary matrix (JSON)")
    sp = add("viscous-evans", [], cmd_viscous_evans, help="Evans scan on a bounded set")
    sp.add_argument("--grid-file", default=None)
    sp.add_argument("--tol", type=_positive(float), default=1e-8)
    sp = add("viscous-kreiss", [trials], cmd_viscous_kreiss,
             help="weighted stability ratios on a bounded set")
    sp.add_argument("--grid-file", default=None)
    sp.add_argument("--weights", default=None, help='JSON such as {"u": "gamma", "der": 1}')
    sp = add("catalog", [], cmd_catalog, needs_input=False, help="list or print catalog entries")
    sp.add_argument("name", nargs="?")
    sp.add_argument("--boundary", default=None)
    sp.add_argument("--param", action="append", help="generator parameter key=value")
    return p


def _config(args) -> dict:
    skip = {"fn", "needs_input", "json", "output"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


INPUT_ERRORS = (UsageError, SchemaError, DimensionMismatch, InvalidGrid, InvalidWeights,
                ValueError, KeyError, TypeError)


def run(argv: Sequence[str] | None = None, timestamp: str | None = None) -> tuple[int, dict | None]:
    """Parse ``argv``, dispatch, print, and return ``(exit code, report)``."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return (EXIT_INVALID if exc.code else EXIT_PASS), None
    try:
        doc = load_document(args.input) if args.needs_input else None
        verdict, code, result, checks = args.fn(args, doc)
    except INPUT_ERRORS as exc:
        print(f"lopa: error: {exc}", file=sys.stderr)
        return EXIT_INVALID, None
    except LopaError as exc:
        print(f"lopa: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL, None
    report = build_report(args.command, _config(args), verdict, result, checks, timestamp)
    text = dumps(report)
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    print(text if args.json else render_text(report), end="\n" if args.json else "")
    return code, report


def main(argv: Sequence[str] | None = None) -> int:
    code, _ = run(argv)
    return code


if __name__ == "__main__":
    sys.exit(main())
