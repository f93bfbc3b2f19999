"""Command line front end: CSV/expression inputs in, JSON reports out.

Subcommands: ``analyze`` (sampled data from CSV), ``integral`` (divergent
integral regularization from kernel/test-function expressions), ``laurent``
(pole peeling with optional contour cross-check), ``selftest`` (law battery).
Exit codes: 0 success, 1 input or I/O problems, 2 extraction failures (a
report with an ``error`` field is still emitted).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
from dataclasses import replace

import numpy as np

from . import laws
from .decomp import Decomposition, Diagnostics, Term, normalize
from .errors import (
    ExpressionError,
    FinitePartError,
    InsufficientData,
    MaxTermsExceeded,
    Nonconvergent,
    StalledExtraction,
)
from .expr import compile_expression
from .extract import ExtractConfig, SampledSequence, decompose, geometric_grid
from .reg import (
    KernelSpec,
    TestFunction,
    contour_finite_part_oracle,
    finite_part_integral,
    laurent_finite_part,
)
from .scales import ExponentKey, ScaleSystem, system_from_spec, system_spec

__all__ = ["main", "decomposition_to_dict", "decomposition_from_dict"]

SCHEMA_VERSION = "1"
_EXTRACTION_ERRORS = (Nonconvergent, StalledExtraction, MaxTermsExceeded)


class CliInputError(Exception):
    pass


def _scalar_dict(value) -> dict:
    c = complex(value)
    return {"re": c.real, "im": c.imag}


def _scalar_from_dict(d) -> complex | float:
    return d["re"] if d["im"] == 0.0 else complex(d["re"], d["im"])


def decomposition_to_dict(dec: Decomposition) -> dict:
    span = dec.diagnostics.grid_span
    return {
        "scale": system_spec(dec.system),
        "terms": [
            {
                "kind": t.key.kind,
                "exponents": list(t.key.exponents),
                "coefficient": _scalar_dict(t.coefficient),
                "stderr": t.stderr,
                "snapped": t.snapped,
            }
            for t in dec.terms
        ],
        "finite_part": _scalar_dict(dec.finite_part),
        "finite_part_stderr": dec.finite_part_stderr,
        "diagnostics": {
            "iterations": dec.diagnostics.iterations,
            "residual_norm": dec.diagnostics.residual_norm,
            "grid": None
            if span is None
            else {"min": span[0], "max": span[1], "count": span[2]},
            "warnings": list(dec.diagnostics.warnings),
        },
    }


def decomposition_from_dict(data: dict) -> Decomposition:
    system = system_from_spec(data["scale"])
    terms = [
        Term(
            ExponentKey(t["kind"], tuple(t["exponents"])),
            _scalar_from_dict(t["coefficient"]),
            t["stderr"],
            t["snapped"],
        )
        for t in data["terms"]
    ]
    diag = data.get("diagnostics", {})
    grid = diag.get("grid")
    return normalize(
        system,
        terms,
        _scalar_from_dict(data["finite_part"]),
        zero_tol=0.0,
        finite_part_stderr=data.get("finite_part_stderr", 0.0),
        diagnostics=Diagnostics(
            residual_norm=diag.get("residual_norm", 0.0),
            iterations=diag.get("iterations", 0),
            grid_span=None if grid is None else (grid["min"], grid["max"], grid["count"]),
            warnings=tuple(diag.get("warnings", ())),
        ),
    )


def _emit(report: dict, json_out: str | None) -> None:
    text = json.dumps(report, indent=2) + "\n"
    sys.stdout.write(text)
    if json_out:
        with open(json_out, "w") as fh:
            fh.write(text)


def _add_extraction_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--max-terms", type=int, default=16)
    parser.add_argument("--snap-q", type=int, default=12, help="largest snapping denominator")
    parser.add_argument("--snap-tol", type=float, default=1e-3)
    parser.add_argument("--limit-model", choices=["richardson", "tail_mean"], default="richardson")
    parser.add_argument("--tail-fraction", type=float, default=0.5)
    parser.add_argument("--json-out", metavar="PATH", default=None)


def _config_from(args) -> ExtractConfig:
    return ExtractConfig(
        max_terms=args.max_terms,
        snap_denominator=args.snap_q,
        snap_tol=args.snap_tol,
        tail_fraction=args.tail_fraction,
        limit_model=args.limit_model,
    )


def _config_dict(config: ExtractConfig) -> dict:
    return {
        "max_terms": config.max_terms,
        "snap_denominator": config.snap_denominator,
        "snap_tol": config.snap_tol,
        "zero_tol": config.zero_tol,
        "tail_fraction": config.tail_fraction,
        "limit_model": config.limit_model,
        "min_order": config.min_order,
    }


def _system_from(args) -> ScaleSystem:
    spec: dict = {"variant": args.scale}
    if args.scale == "lex":
        if not args.lex_scales:
            raise CliInputError("--lex-scales is required with --scale lex")
        spec["lex_scales"] = [e.strip() for e in args.lex_scales.split(",") if e.strip()]
    if args.lambda_min is not None:
        spec["lambda_min"] = args.lambda_min
    try:
        return system_from_spec(spec)
    except (ExpressionError, FinitePartError) as exc:
        raise CliInputError(str(exc)) from None


def _read_csv(path: str) -> tuple[SampledSequence, str]:
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise CliInputError(f"{path}: {exc.strerror or exc}") from None
    digest = hashlib.sha256(raw).hexdigest()
    lines = raw.decode("utf-8", errors="replace").splitlines()
    rows: list[tuple[float, ...]] = []
    header: list[str] | None = None
    for lineno, line in enumerate(lines, start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        cells = [c.strip() for c in stripped.split(",")]
        if header is None:
            header = [c.lower() for c in cells]
            if header not in (["lambda", "value"], ["lambda", "re", "im"]):
                raise CliInputError(
                    f"{path}: line {lineno}: header must be 'lambda,value' or 'lambda,re,im'"
                )
            continue
        if len(cells) != len(header):
            raise CliInputError(f"{path}: line {lineno}: expected {len(header)} columns")
        try:
            rows.append(tuple(float(c) for c in cells))
        except ValueError:
            raise CliInputError(f"{path}: line {lineno}: non-numeric value") from None
    if header is None:
        raise CliInputError(f"{path}: empty input")
    if not rows:
        raise CliInputError(f"{path}: no data rows")
    lam = np.array([r[0] for r in rows])
    if len(header) == 2:
        vals = np.array([r[1] for r in rows])
    else:
        vals = np.array([complex(r[1], r[2]) for r in rows])
        if np.all(vals.imag == 0.0):
            vals = vals.real
    try:
        return SampledSequence(lam, vals), digest
    except ValueError as exc:
        raise CliInputError(f"{path}: {exc}") from None


def _base_report(command: str, digest: str, config: ExtractConfig) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "input_digest": digest,
        "config": _config_dict(config),
        "result": None,
        "error": None,
    }


def _run_extraction(report: dict, json_out, fn):
    try:
        result = fn()
    except _EXTRACTION_ERRORS as exc:
        report["error"] = {"type": type(exc).__name__, "message": str(exc)}
        _emit(report, json_out)
        return 2
    report["result"] = result
    _emit(report, json_out)
    return 0


def _cmd_analyze(args) -> int:
    seq, digest = _read_csv(args.csv)
    system = _system_from(args)
    config = _config_from(args)
    report = _base_report("analyze", digest, config)
    report["scale"] = system_spec(system)

    def run():
        dec = decompose(seq, system, config)
        return decomposition_to_dict(dec)

    return _run_extraction(report, args.json_out, run)


def _cmd_integral(args) -> int:
    config = _config_from(args)
    try:
        phi_fn = compile_expression(args.phi, variable="x")
        profile_expr = compile_expression(args.profile, variable="x")
    except ExpressionError as exc:
        raise CliInputError(str(exc)) from None
    phi = TestFunction(phi_fn, support_radius=args.support_radius, radial=True)
    if args.dim == 1:
        profile = lambda direction: profile_expr(direction)  # noqa: E731
    elif args.dim == 2:
        profile = lambda omega: profile_expr(math.atan2(omega[1], omega[0]))  # noqa: E731
    else:
        profile = lambda omega: profile_expr(omega[2])  # noqa: E731
    kernel = KernelSpec(dimension=args.dim, degree=args.degree, profile=profile)
    digest = hashlib.sha256(
        json.dumps(
            {"dim": args.dim, "degree": args.degree, "profile": args.profile, "phi": args.phi,
             "support_radius": args.support_radius},
            sort_keys=True,
        ).encode()
    ).hexdigest()
    report = _base_report("integral", digest, config)

    def run():
        dec = finite_part_integral(kernel, phi, config)
        return decomposition_to_dict(dec)

    return _run_extraction(report, args.json_out, run)


def _cmd_laurent(args) -> int:
    config = _config_from(args)
    try:
        f = compile_expression(args.f, variable="z")
    except ExpressionError as exc:
        raise CliInputError(str(exc)) from None
    digest = hashlib.sha256(args.f.encode()).hexdigest()
    report = _base_report("laurent", digest, config)
    report["pole_order"] = None

    def run():
        order, dec = laurent_finite_part(f, config, n_max=args.n_max)
        report["pole_order"] = order
        payload = decomposition_to_dict(dec)
        if args.oracle:
            oracle = contour_finite_part_oracle(f, r=args.oracle_radius, m=args.oracle_nodes)
            delta = abs(complex(oracle) - complex(dec.finite_part))
            report["oracle"] = {"value": _scalar_dict(oracle), "delta": delta}
        return payload

    try:
        return _run_extraction(report, args.json_out, run)
    except ExpressionError as exc:
        raise CliInputError(str(exc)) from None


def _cmd_selftest(args) -> int:
    reports = laws.run_all(trials=args.trials, seed=args.seed)
    merged = {
        "schema_version": SCHEMA_VERSION,
        "command": "selftest",
        "seed": args.seed,
        "trials": args.trials,
        "passed": all(r.passed for r in reports),
        "laws": [r.to_dict() for r in reports],
    }
    _emit(merged, args.json_out)
    return 0 if merged["passed"] else 1


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="finitepart",
        description="Decompose divergent quantities into scale terms plus a finite part.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_an = sub.add_parser("analyze", help="extract from a CSV of (lambda, value) samples")
    p_an.add_argument("csv", help="input CSV with header lambda,value or lambda,re,im")
    p_an.add_argument("--scale", choices=["standard", "hadamard", "lex"], default="standard")
    p_an.add_argument("--lex-scales", default=None, help="comma-separated factor expressions in x")
    p_an.add_argument("--lambda-min", type=float, default=None)
    _add_extraction_flags(p_an)
    p_an.set_defaults(fn=_cmd_analyze)

    p_in = sub.add_parser("integral", help="finite part of a divergent integral")
    p_in.add_argument("--dim", type=int, choices=[1, 2, 3], default=1)
    p_in.add_argument("--degree", type=float, required=True)
    p_in.add_argument("--profile", default="1", help="direction profile expression in x")
    p_in.add_argument("--phi", default="cutoff(x,1)", help="radial test function expression in x")
    p_in.add_argument("--support-radius", type=float, default=1.0)
    _add_extraction_flags(p_in)
    p_in.set_defaults(fn=_cmd_integral)

    p_la = sub.add_parser("laurent", help="pole order and finite part of f(1/n)")
    p_la.add_argument("--f", required=True, help="expression in z, e.g. '1/z^2+3/z+5+2*z'")
    p_la.add_argument("--oracle", action="store_true", help="cross-check against the contour mean")
    p_la.add_argument("--oracle-radius", type=float, default=0.5)
    p_la.add_argument("--oracle-nodes", type=int, default=512)
    p_la.add_argument("--n-max", type=int, default=512)
    _add_extraction_flags(p_la)
    p_la.set_defaults(fn=_cmd_laurent)

    p_st = sub.add_parser("selftest", help="run the law battery with fixed seeds")
    p_st.add_argument("--trials", type=int, default=50)
    p_st.add_argument("--seed", type=int, default=20240809)
    p_st.add_argument("--json-out", metavar="PATH", default=None)
    p_st.set_defaults(fn=_cmd_selftest)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except CliInputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (InsufficientData, ExpressionError, FinitePartError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
