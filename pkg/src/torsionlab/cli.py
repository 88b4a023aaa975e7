"""Command line entry point ``torsion``.

Exit codes: 0 success, 1 failed ``verify`` property, 2 validation error,
3 numerical error, 4 parse error.
"""
import argparse
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace

import numpy as np

from . import circle_analytic as ca
from . import combinatorial as cb
from . import complex_torsion as ct
from .errors import ParseError, TorsionError, ValidationError
from .linalg_core import default_tol, generalized_eigenspaces
from .problem_io import (ComplexPayload, ProblemFile, ResultRecord, encode_scalar,
                         load_problem, parse_cohomology_basis)
from .trigpoly import TrigPoly

COMMANDS = ("torsion-direct", "torsion-spectral", "analytic", "combinatorial",
            "relative", "zeta", "spectrum", "verify")
DEFAULT_TRUNCATION = 16


def parse_complex_arg(text):
    parts = [p.strip() for p in text.split(",")]
    try:
        if len(parts) == 1:
            return complex(float(parts[0]), 0.0)
        if len(parts) == 2:
            return complex(float(parts[0]), float(parts[1]))
    except ValueError:
        pass
    raise argparse.ArgumentTypeError(f"expected RE or RE,IM, got {text!r}")


def parse_coeuler(tokens):
    if tokens is None:
        return ca.CoEulerStructureS1.base()
    head = tokens[0]
    if head == "base" and len(tokens) == 1:
        return ca.CoEulerStructureS1.base()
    if head == "canonical" and len(tokens) == 1:
        return ca.CoEulerStructureS1.canonical_structure()
    if head == "offset" and len(tokens) == 2:
        return ca.CoEulerStructureS1.base() + parse_complex_arg(tokens[1])
    raise ValidationError("bad_coeuler", "use base, canonical or offset RE,IM")


def build_parser():
    p = argparse.ArgumentParser(prog="torsion", description="Torsion of flat bundles and finite complexes "
                                "with non-degenerate symmetric bilinear forms.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("file")
    p.add_argument("--z", type=parse_complex_arg, help="holonomy parameter for mapping tori (RE,IM); "
                   "write --z=-1,0 for negative values")
    p.add_argument("--radius", type=float, help="contour radius for torsion-spectral "
                   "(default: first admissible radius)")
    p.add_argument("--truncation", type=int, default=DEFAULT_TRUNCATION, help="Fourier truncation M")
    p.add_argument("--degree", type=int, choices=(0, 1), help="Laplacian degree for spectrum")
    p.add_argument("--euler-offset", type=int, default=0, help="Euler structure offset (integer)")
    p.add_argument("--coeuler", nargs="+", metavar="SPEC", help="base | canonical | offset RE,IM")
    p.add_argument("--basis", help="JSON file with a cohomology basis (list of vectors per degree)")
    p.add_argument("--tol", type=float, help="numerical tolerance (default: TORSION_TOL or 1e-8)")
    p.add_argument("--sweep", type=int, metavar="K", help="verify: also check the scaled family t=1/K..1")
    p.add_argument("--json", action="store_true", help="one JSON record per line")
    p.add_argument("--out", help="append JSON records to this file")
    return p


def _torsion_value(tv):
    return {"torsion": encode_scalar(tv.value), "basis": tv.descriptor()}


def _require_kind(problem, *kinds):
    if problem.kind not in kinds:
        raise ValidationError("command_kind_mismatch",
                              f"command needs kind {' or '.join(kinds)}, file has {problem.kind}")


def _spectral_value(rep):
    return {
        "degree": rep.degree,
        "truncation": rep.truncation,
        "eigenvalues": [encode_scalar(v) for v in rep.eigenvalues],
        "log_partial_products": [encode_scalar(v) for v in rep.log_partial_products],
        "convergence_estimate": float(rep.convergence_estimate),
    }


def _with_basis(problem, args, tol):
    """Cohomology basis from ``--basis`` or the file; required unless acyclic."""
    if not args.basis:
        if problem.payload.basis is None:
            ct.require_acyclic(problem.payload.complex, tol)
        return problem.payload.basis
    try:
        with open(args.basis, encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ParseError(f"cannot read {args.basis}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, f"{args.basis} line {exc.lineno}, column {exc.colno}") from None
    if isinstance(raw, dict):
        raw = raw.get("cohomology_basis")
    return parse_cohomology_basis(raw, problem.payload.complex)


def cmd_torsion_direct(problem, args, tol):
    _require_kind(problem, "complex")
    p = problem.payload
    tv = ct.torsion_direct(p.complex, p.form, _with_basis(problem, args, tol), tol)
    return {}, _torsion_value(tv)


def cmd_torsion_spectral(problem, args, tol):
    _require_kind(problem, "complex")
    p = problem.payload
    radius = args.radius if args.radius is not None else ct.admissible_radii(p.complex, p.form, tol)[0]
    tv = ct.torsion_spectral(p.complex, p.form, radius, _with_basis(problem, args, tol), tol)
    return {"radius": radius}, _torsion_value(tv)


def cmd_analytic(problem, args, tol):
    _require_kind(problem, "circle")
    co = parse_coeuler(args.coeuler)
    tv = ca.analytic_torsion_circle(problem.payload, co, tol=tol)
    return {"coeuler_offset": encode_scalar(co.offset), "canonical": co.canonical}, _torsion_value(tv)


def cmd_combinatorial(problem, args, tol):
    _require_kind(problem, "circle", "mapping_torus")
    if problem.kind == "mapping_torus":
        inp = problem.payload if args.z is None else problem.payload.with_z(args.z)
        return {"z": encode_scalar(inp.z)}, _torsion_value(cb.mapping_torus_torsion(inp, tol))
    e = ca.EulerStructureS1(args.euler_offset)
    hol = ca.monodromy(problem.payload)
    tv = cb.combinatorial_torsion_circle(hol, e, tol=tol)
    return {"euler_offset": e.offset}, _torsion_value(tv)


def cmd_relative(problem, args, tol):
    _require_kind(problem, "circle")
    e = ca.EulerStructureS1(args.euler_offset)
    rep = cb.relative_torsion(problem.payload, e, tol=tol)
    return {"euler_offset": e.offset}, {
        "S": encode_scalar(rep.S),
        "abs_S_minus_1": rep.modulus_deviation,
        "S_minus_1": rep.unit_deviation,
        "analytic": encode_scalar(rep.analytic),
        "combinatorial": encode_scalar(rep.combinatorial),
    }


def cmd_zeta(problem, args, tol):
    _require_kind(problem, "mapping_torus")
    inp = problem.payload if args.z is None else problem.payload.with_z(args.z)
    zeta = cb.lefschetz_zeta(inp, tol)
    return {"z": encode_scalar(inp.z)}, {"zeta": encode_scalar(zeta), "torsion": encode_scalar(zeta ** 2)}


def cmd_spectrum(problem, args, tol):
    _require_kind(problem, "circle", "complex")
    if problem.kind == "complex":
        p = problem.payload
        out = []
        for q, L in zip(p.complex.degrees, ct.laplacian(p.complex, p.form, tol)):
            clusters = generalized_eigenspaces(L, tol)
            out.append({"degree": q, "clusters": [
                {"center": encode_scalar(c.center), "multiplicity": c.multiplicity} for c in clusters]})
        return {}, {"laplacians": out}
    degrees = (0, 1) if args.degree is None else (args.degree,)
    try:
        reports = [_spectral_value(ca.galerkin_spectrum(problem.payload, q, args.truncation)) for q in degrees]
    except ValueError as exc:
        raise ValidationError("truncation_too_small", str(exc)) from None
    return {"truncation": args.truncation}, {"spectra": reports}


def _check(name, deviation, threshold, detail=None):
    deviation = float(deviation)
    out = {"property": name, "passed": bool(deviation <= threshold), "deviation": deviation,
           "threshold": threshold}
    if detail is not None:
        out["detail"] = detail
    return out


def verify_complex(payload, tol):
    C, b = payload.complex, payload.form
    checks = [_check("d_squared_zero", C.check(tol), tol)]
    h = payload.basis
    if h is None and not ct.is_acyclic(C, tol):
        checks.append(_check("acyclic_or_basis_given", 1.0, 0.0, "supply a cohomology basis"))
        return checks
    direct = ct.torsion_direct(C, b, h, tol).value
    for r in ct.admissible_radii(C, b, tol):
        spec = ct.torsion_spectral(C, b, r, h, tol).value
        checks.append(_check(f"spectral_equals_direct[r={r:.6g}]", abs(spec / direct - 1), 1e-6))
    if h is None:
        Cc, bc = ct.conjugate(C, b)
        conj = ct.torsion_direct(Cc, bc, None, tol).value
        checks.append(_check("conjugation", abs(conj / np.conj(direct) - 1), 1e-8))
    degenerate = [r.degree for r in ct.kernel_form_report(C, b, tol) if r.degenerate]
    checks.append(_check("kernel_form_report", 0.0, 0.0,
                         f"degenerate on ker Delta in degrees {degenerate}" if degenerate
                         else "non-degenerate on every kernel"))
    return checks


def verify_circle(bundle, tol):
    hol = ca.monodromy(bundle)
    checks = [
        _check("laplacian_coefficients", ca.check_laplacian_coefficients(bundle, np.random.default_rng(0)), 1e-8),
        _check("det_holonomy", abs(hol.det / np.exp(ca.trace_integral_a(bundle)) - 1), 1e-8),
    ]
    sign = ca.holonomy_sign(bundle, hol)
    checks.append(_check("holonomy_sign_is_pm1", min(abs(sign - 1), abs(sign + 1)), 1e-8,
                         f"sign {sign.real:+.0f}"))
    for sigma in range(-2, 3):
        rep = cb.relative_torsion(bundle, ca.EulerStructureS1(sigma), hol, tol)
        checks.append(_check(f"relative_torsion_is_1[sigma={sigma}]", rep.unit_deviation, 1e-6))
    canon = ca.analytic_torsion_circle(bundle, ca.CoEulerStructureS1.canonical_structure(), hol, tol).value
    det_a1 = np.linalg.det(hol.A - np.eye(bundle.rank))
    expected = ca.b_sign(bundle) * hol.det / det_a1 ** 2
    checks.append(_check("canonical_coeuler_value", abs(canon / expected - 1), 1e-8))
    m_lo = max(24, 2 * (bundle.a.degree + bundle.b.degree) + 2)
    checks.append(_check("galerkin_self_convergence", ca.galerkin_self_convergence(bundle, 1, m_lo, m_lo + 8), 1e-6))
    return checks


def verify_mapping_torus(inp, tol):
    zeta = cb.lefschetz_zeta(inp, tol)
    rho = max([np.max(np.abs(np.linalg.eigvals(P))) for P in inp.phi_star if P.size] + [1.0])
    z0 = 0.1 / rho
    series = cb.lefschetz_log_series(inp.phi_star, z0, 12)
    closed = np.log(cb.lefschetz_zeta(inp.with_z(z0), tol))
    return [
        _check("zeta_series_order12", abs(series - closed), 1e-9, f"z = {z0:.6g}"),
        _check("torsion_is_zeta_squared", abs(cb.mapping_torus_torsion(inp, tol).value / zeta ** 2 - 1), 1e-12),
    ]


_VERIFY = {"complex": verify_complex, "circle": verify_circle, "mapping_torus": verify_mapping_torus}


def scaled_problem(problem, t):
    """The family point ``t`` used by ``verify --sweep``."""
    p = problem.payload
    if problem.kind == "circle":
        payload = replace(p, a=TrigPoly(p.a.coeffs * t))
    elif problem.kind == "mapping_torus":
        payload = p.with_z(p.z * t)
    else:
        C = ct.GradedComplex(p.complex.degree_min, p.complex.dims, tuple(t * D for D in p.complex.differentials))
        payload = ComplexPayload(C, p.form, None)
    return ProblemFile(problem.kind, payload, problem.metadata)


def _verify_point(problem, tol, t):
    try:
        return t, _VERIFY[problem.kind](problem.payload, tol), None
    except TorsionError as exc:
        return t, None, exc


def run_verify(problem, args, tol, digest):
    params = {"sweep": args.sweep} if args.sweep else {}
    tolerances = {"tol": tol}
    points = [1.0] if not args.sweep else [k / args.sweep for k in range(1, args.sweep + 1)]
    problems = [(t, problem if t == 1.0 else scaled_problem(problem, t)) for t in points]
    with ThreadPoolExecutor() as pool:
        results = list(pool.map(lambda tp: _verify_point(tp[1], tol, tp[0]), problems))
    records = []
    for t, checks, exc in results:
        pt = dict(params, t=t) if args.sweep else params
        if exc is not None:
            records.append(_error_record(digest, "verify", pt, tolerances, exc))
            continue
        for c in checks:
            records.append(ResultRecord(digest, "verify", pt, c, tolerances,
                                        status="ok" if c["passed"] else "failed"))
    return records


_DISPATCH = {
    "torsion-direct": cmd_torsion_direct,
    "torsion-spectral": cmd_torsion_spectral,
    "analytic": cmd_analytic,
    "combinatorial": cmd_combinatorial,
    "relative": cmd_relative,
    "zeta": cmd_zeta,
    "spectrum": cmd_spectrum,
}


def _error_record(digest, command, params, tolerances, exc):
    return ResultRecord(digest, command, params, None, tolerances, status="error",
                        error={"code": exc.code, "message": str(exc)})


def run(command, problem, args, tol=None):
    """Execute one command and return its result records."""
    tol = default_tol() if tol is None else tol
    digest = problem.digest
    if command == "verify":
        return run_verify(problem, args, tol, digest)
    params, value = _DISPATCH[command](problem, args, tol)
    return [ResultRecord(digest, command, params, value, {"tol": tol})]


def _format_value(v):
    if isinstance(v, list) and len(v) == 2 and all(isinstance(x, float) for x in v):
        return f"{complex(v[0], v[1]):.15g}".strip("()")
    if isinstance(v, float):
        return f"{v:.6e}"
    return json.dumps(v) if isinstance(v, (list, dict)) else str(v)


def format_record(rec):
    lines = [f"{rec.operation}  [{rec.status}]  {rec.input_digest or '-'}"]
    if rec.params:
        lines.append("  params: " + ", ".join(f"{k}={_format_value(v)}" for k, v in rec.params.items()))
    if rec.error:
        lines.append(f"  {rec.error['code']}: {rec.error['message']}")
    elif isinstance(rec.value, dict):
        width = max(len(k) for k in rec.value)
        for k, v in rec.value.items():
            lines.append(f"  {k:<{width}}  {_format_value(v)}")
    return "\n".join(lines)


def _emit(records, args, out=None):
    out = sys.stdout if out is None else out
    for rec in records:
        out.write((rec.to_json() if args.json else format_record(rec)) + "\n")
    if args.out:
        with open(args.out, "a", encoding="utf-8") as fh:
            for rec in records:
                fh.write(rec.to_json() + "\n")


def main(argv=None):
    args = build_parser().parse_args(argv)
    digest = None
    tolerances = {}
    try:
        tol = args.tol if args.tol is not None else default_tol()
        tolerances = {"tol": tol}
        problem = load_problem(args.file)
        digest = problem.digest
        records = run(args.command, problem, args, tol)
    except TorsionError as exc:
        _emit([_error_record(digest, args.command, {}, tolerances, exc)], args)
        if not args.json:
            print(f"error: {exc.code}: {exc}", file=sys.stderr)
        return exc.exit_status
    _emit(records, args)
    if any(r.status == "error" for r in records):
        return 3
    return 1 if any(r.status == "failed" for r in records) else 0


if __name__ == "__main__":
    sys.exit(main())
