"""Command line interface.

Exit codes: 0 all checks pass, 1 residual failure, 2 parse/usage error,
3 precondition failure (not Kahler / Kahler form not exact / bad kappa),
4 candidate is not projective special Kahler (c-map refused).
"""

from __future__ import annotations

import argparse
import os
import sys

from .cmap import NotPSKError, qk_algebra, qk_verify
from .cone import DSquaredError, cone_coframe, cone_lc, eta_from_pq, special_blocks, verify_eta_conditions
from .connection import NotKahlerError, curvature, kahler_check, levi_civita
from .intrinsic import all_residuals, pq_from_tensors
from .io import (
    ParseError,
    Report,
    algebra_to_dict,
    load_algebra_file,
    load_template_file,
    save_algebra_file,
)
from .lie import AdaptedBasis, NotExactError
from .solver import SolveConfig, build_geometry, scan_curvature, solve

EXIT_OK = 0
EXIT_RESIDUAL = 1
EXIT_PARSE = 2
EXIT_PRECONDITION = 3
EXIT_NOT_PSK = 4


def _env_seed() -> int:
    try:
        return int(os.environ.get("PSK_SEED", "0"))
    except ValueError:
        return 0


def _emit(report: Report, stream=None) -> None:
    print(report.to_json(), file=stream or sys.stdout)


def cmd_check(args) -> int:
    af = load_algebra_file(args.path)
    if af.candidate is None:
        raise ParseError("check requires a 'candidate' block in the file")
    kr = kahler_check(af.L, af.B)
    if not kr.is_kahler():
        _emit(Report("check", "NotKahler",
                     {"domega": kr.domega_norm, "shape": kr.shape_residual}))
        return EXIT_PRECONDITION
    try:
        af.candidate.validate(af.L)
        conn = levi_civita(af.L, af.B)
    except (ValueError, NotKahlerError) as exc:
        _emit(Report("check", "Precondition", {"error": str(exc)}))
        return EXIT_PRECONDITION
    res = all_residuals(af.L, af.B, af.candidate, conn, curvature(conn, af.L))
    ok = max(res.values()) < args.tol
    _emit(Report("check", "ok" if ok else "ResidualFailure",
                 {"residuals": res, "tolerance": args.tol}))
    return EXIT_OK if ok else EXIT_RESIDUAL


def cmd_solve(args) -> int:
    af = load_algebra_file(args.path)
    cfg = SolveConfig(starts=args.starts, seed=args.seed,
                      success_threshold=args.tol)
    try:
        geom = build_geometry(af.L, af.B, allow_nonexact=args.kappa_free)
    except NotExactError as exc:
        _emit(Report("solve", "NotExact", {"error": str(exc)}, seed=args.seed))
        return EXIT_PRECONDITION
    except NotKahlerError as exc:
        _emit(Report("solve", "NotKahler", {"error": str(exc)}, seed=args.seed))
        return EXIT_PRECONDITION
    result = solve(geom, cfg)
    payload = {
        "best_residual": result.best_residual,
        "per_equation": result.per_equation,
        "mode": result.mode,
        "gauge": result.gauge_note,
        "distinct_orbits": result.distinct_orbits,
    }
    if result.candidate is not None and result.status == "Solved":
        payload["candidate"] = algebra_to_dict(af.L, af.B,
                                               candidate=result.candidate)["candidate"]
    _emit(Report("solve", result.status, payload, seed=args.seed))
    return EXIT_OK if result.status == "Solved" else EXIT_RESIDUAL


def cmd_scan(args) -> int:
    family, base = load_template_file(args.path)
    if args.values:
        try:
            values = [float(v) for v in args.values.split(",") if v.strip()]
        except ValueError:
            raise ParseError(f"bad --values list {args.values!r}")
        if not values:
            raise ParseError("empty --values list")
        lo = hi = 0.0
        steps = len(values)
    else:
        if args.range is None:
            raise ParseError("scan needs --range LO HI or --values")
        lo, hi = args.range
        if not hi > lo or args.steps < 2:
            raise ParseError("scan range must satisfy lo < hi and steps >= 2")
        values = None
        steps = args.steps
    cfg = SolveConfig(starts=args.starts, seed=args.seed,
                      success_threshold=args.tol)
    result = scan_curvature(family, lo, hi, steps, cfg, values=values,
                            polish=not args.no_polish)
    table = "\n".join(f"{p.parameter:.12g}\t{p.best_residual:.17g}"
                      for p in result.points)
    if args.table:
        with open(args.table, "w", encoding="utf-8") as fh:
            fh.write("# parameter\tbest_residual\n" + table + "\n")
    payload = {
        "points": [[p.parameter, p.best_residual] for p in result.points],
        "statuses": [p.status for p in result.points],
        "feasible": result.feasible,
        "polished": result.polished,
        "table": table,
    }
    _emit(Report("scan", "ok", payload, seed=args.seed))
    return EXIT_OK


def cmd_cone_verify(args) -> int:
    af = load_algebra_file(args.path)
    if af.candidate is None:
        raise ParseError("cone-verify requires a 'candidate' block in the file")
    try:
        conn = levi_civita(af.L, af.B)
        CA = cone_coframe(af.L, af.B, af.candidate.kappa)
    except (NotKahlerError, DSquaredError) as exc:
        _emit(Report("cone-verify", "Precondition", {"error": str(exc)}))
        return EXIT_PRECONDITION
    p, q = pq_from_tensors(af.candidate.Sa, af.candidate.Sb)
    omega_lc = cone_lc(CA, conn)
    eta = eta_from_pq(CA, p, q)
    report = verify_eta_conditions(CA, eta, omega_lc + eta.matrix)
    T, U, V, W = special_blocks(CA, conn, p, q)
    report["blocks_T"] = T.norm_inf()
    report["blocks_U"] = U.norm_inf()
    report["blocks_V"] = V.norm_inf()
    report["blocks_W"] = W.norm_inf()
    ok = max(report.values()) < args.tol
    _emit(Report("cone-verify", "ok" if ok else "ResidualFailure",
                 {"residuals": report, "tolerance": args.tol}))
    return EXIT_OK if ok else EXIT_RESIDUAL


def cmd_cmap(args) -> int:
    af = load_algebra_file(args.path)
    if af.candidate is None:
        raise ParseError("cmap requires a 'candidate' block in the file")
    try:
        Q = qk_algebra(af.L, af.B, af.candidate, tol=args.tol)
    except (NotExactError, NotKahlerError, DSquaredError) as exc:
        _emit(Report("cmap", "Precondition", {"error": str(exc)}))
        return EXIT_PRECONDITION
    except NotPSKError as exc:
        _emit(Report("cmap", "NotPSK", {"error": str(exc)}))
        return EXIT_NOT_PSK
    rep = qk_verify(Q)
    if args.output:
        out_B = AdaptedBasis(Q.dim // 2)
        save_algebra_file(args.output, Q.algebra, out_B, labels=Q.labels)
    payload = {
        "dimension": rep.dim,
        "jacobi_residual": rep.jacobi_residual,
        "gram_min_eigenvalue": rep.gram_min_eig,
        "sp1_fit_residual": rep.sp1_residual,
        "completely_solvable": rep.completely_solvable,
        "derived_series": list(rep.derived_series),
        "adjoint_imag_max": rep.adjoint_imag_max,
        "output_file": args.output,
    }
    green = (rep.jacobi_residual < 1e-9 and rep.gram_min_eig > 0.1
             and rep.sp1_residual < 1e-8 and rep.completely_solvable)
    _emit(Report("cmap", "ok" if green else "ResidualFailure", payload))
    return EXIT_OK if green else EXIT_RESIDUAL


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pskmap",
        description="Left-invariant projective special Kahler structures: "
                    "verification, numerical discovery, and the c-map.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", help="evaluate all intrinsic residuals of a candidate")
    p.add_argument("path")
    p.add_argument("--tol", type=float, default=1e-8)
    p.set_defaults(fn=cmd_check)

    p = sub.add_parser("solve", help="search for a candidate by least squares")
    p.add_argument("path")
    p.add_argument("--starts", type=int, default=64)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--kappa-free", action="store_true",
                   help="fall back to the kappa-free system when the Kahler "
                        "form has no invariant primitive")
    p.set_defaults(fn=cmd_solve)

    p = sub.add_parser("scan", help="residual landscape of a one-parameter family")
    p.add_argument("path", help="template file with 'c' bracket constants")
    p.add_argument("--range", nargs=2, type=float, metavar=("LO", "HI"))
    p.add_argument("--steps", type=int, default=11)
    p.add_argument("--values", type=str, default=None,
                   help="comma-separated explicit parameter list")
    p.add_argument("--starts", type=int, default=16)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--no-polish", action="store_true")
    p.add_argument("--table", type=str, default=None,
                   help="also write a plain-text (parameter, residual) table")
    p.set_defaults(fn=cmd_scan)

    p = sub.add_parser("cone-verify", help="independent cone-level verification")
    p.add_argument("path")
    p.add_argument("--tol", type=float, default=1e-8)
    p.set_defaults(fn=cmd_cone_verify)

    p = sub.add_parser("cmap", help="apply the twist and emit the 4n+4 algebra")
    p.add_argument("path")
    p.add_argument("-o", "--output", type=str, default=None)
    p.add_argument("--tol", type=float, default=1e-8)
    p.set_defaults(fn=cmd_cmap)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_PARSE if exc.code not in (0, None) else 0
    if getattr(args, "seed", None) is None and hasattr(args, "seed"):
        args.seed = _env_seed()
    try:
        return args.fn(args)
    except ParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except (NotExactError, NotKahlerError, DSquaredError, ValueError) as exc:
        print(f"precondition: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION


if __name__ == "__main__":
    sys.exit(main())
