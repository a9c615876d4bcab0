#!/usr/bin/env python3
"""
Matrix Certifier - command-line front end

USAGE:
    matrix-certifier check-membership f.json -g ball.json --dmax 4
    matrix-certifier nnsd f.json -g ball.json
    matrix-certifier factor-univariate f.json
    matrix-certifier diagonalize f.json --branch-cap 16 --check-points 500
    matrix-certifier arch-witness -g ball.json
    matrix-certifier real-eig-cert f.json -g interval.json --dmax 3
    matrix-certifier verify cert.json --exact
    matrix-certifier verify-point pair.json f.json -g ball.json
    matrix-certifier sample -g ball.json --count 100 --seed 7
    matrix-certifier product-module -g g1.json -g g2.json
    matrix-certifier lower-bound f.json -g ball.json --degree 3
    matrix-certifier min-eig f.json -g ball.json --count 1000 --seed 7
    matrix-certifier selfcheck
    matrix-certifier print-schemas

EXIT CODES:
    0  certificate found or verified
    1  separated or refuted
    2  exhausted, unknown, or a numerical/search failure
    3  usage, input or configuration error

Every command prints the envelope {meta, input, output, error} as JSON on
stdout; logs are JSON lines on stderr.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
import warnings
from collections.abc import Callable, Sequence
from pathlib import Path
from typing import Any, NoReturn

import numpy as np
from pydantic import BaseModel

from . import __version__
from .certify import (
    ArchWitness,
    SearchOutcome,
    Verdict,
    archimedean_witness,
    find_membership,
    find_nnsd_certificate,
    lower_bound,
    product_module,
    real_eigenvalue_certificate,
)
from .config import CertifierConfig, load_config
from .diag import check_equivalence, diagonalize_branching, sample_points
from .envelope import Envelope, ErrorModel, build_envelope, error_model, render
from .errors import (
    BranchCapExceeded,
    CertifierError,
    DimensionMismatch,
    InputError,
    NonScalarGenerator,
    NotPsdOnLine,
)
from .gram import ModulePresentation, verify_certificate
from .observability import get_logger, log_event, setup_logging
from .polycore import MatrixPoly, ScalarPoly
from .setops import min_eig_stats, sample_region
from .states import verify_point
from .univar import jakubovic_factor, max_rows
from .wire import (
    CertificateModel,
    MatrixPolyModel,
    OutcomeModel,
    PairModel,
    PresentationModel,
    StateModel,
    branch_to_model,
    certificate_to_model,
    dump,
    lift_generator,
    matrix_to_model,
    outcome_to_model,
    pair_from_model,
    presentation_from_model,
    read_certificate,
    read_matrix,
    read_model,
    residual_to_model,
    state_to_model,
)

logger = get_logger(__name__)

EXIT_OK = 0
EXIT_REFUTED = 1
EXIT_UNKNOWN = 2
EXIT_INPUT = 3

VERDICT_EXIT = {
    Verdict.FOUND: EXIT_OK,
    Verdict.SEPARATED: EXIT_REFUTED,
    Verdict.EXHAUSTED: EXIT_UNKNOWN,
}

Result = tuple[dict[str, Any], int]


class _Parser(argparse.ArgumentParser):
    """Usage errors exit with 3 instead of argparse's 2."""

    def error(self, message: str) -> NoReturn:
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


# =============================================================================
# ARGUMENTS
# =============================================================================


def _common_options() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="key = value configuration file")
    common.add_argument(
        "--log-level", choices=["DEBUG", "INFO", "WARNING", "ERROR"], help="stderr log level"
    )
    common.add_argument("--json", type=Path, dest="json_out", help="also write the envelope here")
    common.add_argument("--seed", type=int, help="seed; makes the output byte-for-byte reproducible")
    common.add_argument("--tol", type=float, help="feasibility tolerance (default 1e-8)")
    common.add_argument("--dmax", type=int, help="largest half-degree to try")
    common.add_argument("--branch-cap", type=int, help="diagonalization branch limit")
    mode = common.add_mutually_exclusive_group()
    mode.add_argument("--exact", dest="exact", action="store_true", default=None, help="rationalize")
    mode.add_argument("--numeric", dest="exact", action="store_false", help="floating point only")
    return common


def _module_options() -> argparse.ArgumentParser:
    module = argparse.ArgumentParser(add_help=False)
    module.add_argument(
        "-g",
        "--generator",
        dest="generators",
        action="append",
        type=Path,
        default=[],
        help="generator MatrixPoly JSON (repeatable; 1x1 generators are lifted to g*I)",
    )
    module.add_argument(
        "--equality",
        dest="equalities",
        action="append",
        type=Path,
        default=[],
        help="1x1 MatrixPoly JSON h imposing h = 0 (repeatable)",
    )
    module.add_argument("--presentation", type=Path, help="ModulePresentation JSON")
    return module


def create_argument_parser() -> argparse.ArgumentParser:
    """Create CLI argument parser"""
    parser = _Parser(
        prog="matrix-certifier",
        description="Matrix Certifier - positivity certificates for matrix polynomials",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog=__doc__,
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = _common_options()
    module = _module_options()
    sub = parser.add_subparsers(dest="command", help="Available commands")

    p = sub.add_parser("check-membership", parents=[common, module], help="search f in M_G")
    p.add_argument("target", type=Path, help="MatrixPoly JSON")
    p.add_argument("--epsilon", type=float, default=0.0, help="search f + epsilon*I instead")
    p.add_argument("--products", action="store_true", help="replace scalar G by its product module")
    p.add_argument("--state-out", type=Path, help="write the separating state here")
    p.add_argument("--no-extract", action="store_true", help="skip point extraction")

    p = sub.add_parser("nnsd", parents=[common, module], help="nowhere negative semidefinite certificate")
    p.add_argument("target", type=Path)
    p.add_argument("--assume-archimedean", action="store_true", help="skip the archimedean check")
    p.add_argument("--state-out", type=Path)

    p = sub.add_parser("factor-univariate", parents=[common], help="f = g^T g on the real line")
    p.add_argument("target", type=Path)

    p = sub.add_parser("diagonalize", parents=[common], help="branching symmetric diagonalization")
    p.add_argument("target", type=Path)
    p.add_argument("--check-points", type=int, default=0, help="sampled PSD-equivalence test")
    p.add_argument("--radius", type=float, default=2.0)

    p = sub.add_parser("arch-witness", parents=[common, module], help="find N - sum X_i^2 in M_G")
    p.add_argument("--n", type=int, help="variables (needed without generators)")
    p.add_argument("--t", type=int, default=1, help="matrix size (needed without generators)")
    p.add_argument("--n-max", type=int)
    p.add_argument("--arch-dmax", type=int)

    p = sub.add_parser("real-eig-cert", parents=[common, module], help="real eigenvalues are positive")
    p.add_argument("target", type=Path)
    p.add_argument("--assume-archimedean", action="store_true")

    p = sub.add_parser("verify", parents=[common], help="re-check a certificate file")
    p.add_argument("certificate", type=Path)

    p = sub.add_parser("verify-point", parents=[common, module], help="check a point/vector pair")
    p.add_argument("pair", type=Path, help="PointVectorPair JSON")
    p.add_argument("target", type=Path)
    p.add_argument("--eps", type=float, default=1e-6)

    p = sub.add_parser("sample", parents=[common, module], help="rejection-sample S_G")
    p.add_argument("--n", type=int)
    p.add_argument("--count", type=int)
    p.add_argument("--box", type=float, help="half side of the sampling box")

    p = sub.add_parser("product-module", parents=[common, module], help="all products of scalar G")

    p = sub.add_parser("lower-bound", parents=[common, module], help="certified lambda with f - lambda*I in M_G")
    p.add_argument("target", type=Path)
    p.add_argument("--degree", type=int, required=True)

    p = sub.add_parser("min-eig", parents=[common, module], help="min eigenvalue of f over samples of S_G")
    p.add_argument("target", type=Path)
    p.add_argument("--count", type=int)
    p.add_argument("--box", type=float)

    sub.add_parser("selfcheck", parents=[common], help="Validate system configuration")
    sub.add_parser("print-schemas", parents=[common], help="Export JSON schemas")
    return parser


# =============================================================================
# INPUT HELPERS
# =============================================================================


def _file_digest(path: Path) -> str:
    try:
        return hashlib.sha256(path.read_bytes()).hexdigest()
    except OSError:
        return ""


def _input_record(args: argparse.Namespace) -> dict[str, Any]:
    """Options as given plus a digest of every input file."""
    options: dict[str, Any] = {}
    files: dict[str, str] = {}
    for key, value in sorted(vars(args).items()):
        if key in {"json_out", "state_out", "log_level"}:
            continue
        if isinstance(value, Path):
            options[key] = str(value)
            files[str(value)] = _file_digest(value)
        elif isinstance(value, list) and value and isinstance(value[0], Path):
            options[key] = [str(v) for v in value]
            files.update({str(v): _file_digest(v) for v in value})
        else:
            options[key] = value
    return {"options": options, "files": files}


def _scalar_of(m: MatrixPoly, path: Path) -> ScalarPoly:
    s = m.scalar_part()
    if s is None:
        raise NonScalarGenerator(f"{path} is not a scalar generator")
    return s


def _presentation(args: argparse.Namespace, n: int | None, t: int | None) -> ModulePresentation:
    if args.presentation is not None:
        pres = presentation_from_model(read_model(args.presentation, PresentationModel))
        if (n is not None and pres.n != n) or (t is not None and pres.t != t):
            raise DimensionMismatch(
                f"presentation is n={pres.n}, t={pres.t}; target is n={n}, t={t}"
            )
        return pres
    raw = [read_matrix(path) for path in args.generators]
    eqs = [_scalar_of(read_matrix(path), path) for path in args.equalities]
    if n is None:
        n = raw[0].n if raw else (eqs[0].n if eqs else getattr(args, "n", None))
    if t is None:
        t = next((g.rows for g in raw if g.shape != (1, 1)), getattr(args, "t", None) or 1)
    if n is None:
        raise InputError("give --n or at least one generator")
    if getattr(args, "products", False):
        scalars = [_scalar_of(g, path) for g, path in zip(raw, args.generators, strict=True)]
        raw = [MatrixPoly.from_scalar(p) for p in product_module(scalars)]
    return ModulePresentation(n, t, tuple(lift_generator(g, t) for g in raw), tuple(eqs))


def _write_model(path: Path | None, model: BaseModel | None) -> None:
    if path is None or model is None:
        return
    path.write_text(json.dumps(dump(model), indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _outcome_result(outcome: SearchOutcome, args: argparse.Namespace) -> Result:
    model = outcome_to_model(outcome, deterministic=args.seed is not None)
    _write_model(getattr(args, "state_out", None), model.state)
    return dump(model), VERDICT_EXIT[outcome.verdict]


# =============================================================================
# COMMANDS
# =============================================================================


def cmd_check_membership(args: argparse.Namespace, config: CertifierConfig) -> Result:
    f = read_matrix(args.target)
    pres = _presentation(args, f.n, f.t)
    outcome = find_membership(
        f, pres, config.dmax, config, epsilon=args.epsilon, extract=not args.no_extract
    )
    return _outcome_result(outcome, args)


def cmd_nnsd(args: argparse.Namespace, config: CertifierConfig) -> Result:
    f = read_matrix(args.target)
    pres = _presentation(args, f.n, f.t)
    outcome = find_nnsd_certificate(
        f, pres, config.dmax, config, assume_archimedean=args.assume_archimedean
    )
    return _outcome_result(outcome, args)


def cmd_factor_univariate(args: argparse.Namespace, config: CertifierConfig) -> Result:
    f = read_matrix(args.target)
    try:
        result = jakubovic_factor(f, config)
    except NotPsdOnLine as exc:
        return {
            "psd_on_line": False,
            "reason": exc.message,
            "witness": exc.witness,
            "min_eigenvalue": exc.min_eigenvalue,
        }, EXIT_REFUTED
    output: dict[str, Any] = {
        "psd_on_line": True,
        "g": dump(matrix_to_model(result.g)),
        "rows": result.g.rows,
        "max_rows": max_rows(f),
        "residual": result.residual,
        "exact": result.exact,
    }
    if result.exact_rows is not None:
        output["exact_rows"] = dump(matrix_to_model(result.exact_rows))
        output["exact_weights"] = [
            {"num": w.numerator, "den": w.denominator} for w in result.exact_weights
        ]
    return output, EXIT_OK


def cmd_diagonalize(args: argparse.Namespace, config: CertifierConfig) -> Result:
    f = read_matrix(args.target)
    try:
        branches = diagonalize_branching(f, config.branch_cap)
    except BranchCapExceeded as exc:
        return {
            "complete": False,
            "reason": exc.message,
            "branches": [dump(branch_to_model(b)) for b in exc.partial],
        }, EXIT_UNKNOWN
    output: dict[str, Any] = {
        "complete": True,
        "branches": [dump(branch_to_model(b)) for b in branches],
        "congruence_verified": all(b.check(f) for b in branches),
    }
    code = EXIT_OK if output["congruence_verified"] else EXIT_REFUTED
    if args.check_points > 0:
        pts = sample_points(f.n, args.check_points, args.radius, config.seed)
        report = check_equivalence(f, branches, pts)
        output["equivalence"] = {
            "points": report.points,
            "violations": report.violations,
            "ambiguous": report.ambiguous,
            "first_violation": list(report.first_violation) if report.first_violation else None,
        }
        if not report.passed:
            code = EXIT_REFUTED
    return output, code


def cmd_arch_witness(args: argparse.Namespace, config: CertifierConfig) -> Result:
    pres = _presentation(args, args.n, None)
    found = archimedean_witness(
        pres, args.n_max or config.arch_n_max, args.arch_dmax or config.arch_d_max, config
    )
    if isinstance(found, ArchWitness):
        return {
            "found": True,
            "n_bound": found.n_bound,
            "radius": found.radius,
            "degree": found.degree,
            "certificate": dump(certificate_to_model(found.certificate)),
        }, EXIT_OK
    return {"found": False, "tried": [list(p) for p in found.tried]}, EXIT_UNKNOWN


def cmd_real_eig_cert(args: argparse.Namespace, config: CertifierConfig) -> Result:
    f = read_matrix(args.target)
    gens = [_scalar_of(read_matrix(path), path) for path in args.generators]
    if any(g.n != f.n for g in gens):
        raise DimensionMismatch("generators and target use different variable counts")
    outcome = real_eigenvalue_certificate(
        f, gens, config.dmax, config, assume_archimedean=args.assume_archimedean
    )
    return _outcome_result(outcome, args)


def cmd_verify(args: argparse.Namespace, config: CertifierConfig) -> Result:
    cert = read_certificate(args.certificate)
    mode = "exact" if config.exact else "numeric"
    if mode == "exact" and not cert.exact:
        mode = "numeric"
    report = verify_certificate(cert, mode, config.feas_tol)
    return {"residual": dump(residual_to_model(report))}, EXIT_OK if report.passed else EXIT_REFUTED


def cmd_verify_point(args: argparse.Namespace, config: CertifierConfig) -> Result:
    pair = pair_from_model(read_model(args.pair, PairModel))
    f = read_matrix(args.target)
    pres = _presentation(args, f.n, f.t)
    if len(pair.x) != f.n or len(pair.v) != f.t:
        raise DimensionMismatch(f"pair has x in R^{len(pair.x)}, v in R^{len(pair.v)}")
    report = verify_point(pair, f, pres, args.eps)
    return {
        "value": report.value,
        "generator_min_eigenvalues": list(report.generator_min_eigenvalues),
        "equality_values": list(report.equality_values),
        "in_region": report.in_region,
        "separates": report.separates,
        "passed": report.passed,
    }, EXIT_OK if report.passed else EXIT_REFUTED


def cmd_sample(args: argparse.Namespace, config: CertifierConfig) -> Result:
    pres = _presentation(args, args.n, None)
    report = sample_region(
        pres, args.count or config.sample_count, args.box or config.box_radius, config.seed
    )
    return {
        "points": report.points.tolist(),
        "draws": report.draws,
        "accepted": report.accepted,
        "acceptance_rate": report.acceptance_rate,
        "empty_suspected": report.empty_suspected,
        "box": [list(side) for side in report.box],
    }, EXIT_OK if report.accepted > 0 else EXIT_UNKNOWN


def cmd_product_module(args: argparse.Namespace, config: CertifierConfig) -> Result:
    gens = [_scalar_of(read_matrix(path), path) for path in args.generators]
    products = product_module(gens)
    return {
        "count": len(products),
        "products": [dump(matrix_to_model(MatrixPoly.from_scalar(p))) for p in products],
    }, EXIT_OK


def cmd_lower_bound(args: argparse.Namespace, config: CertifierConfig) -> Result:
    f = read_matrix(args.target)
    pres = _presentation(args, f.n, f.t)
    lb = lower_bound(f, pres, args.degree, config)
    output: dict[str, Any] = {"status": lb.status.value, "degree": lb.degree, "bound": lb.bound}
    if lb.certificate is not None:
        output["certificate"] = dump(certificate_to_model(lb.certificate))
    if lb.state is not None:
        output["state"] = dump(state_to_model(lb.state))
    verified = bool(lb.certificate and lb.certificate.residual and lb.certificate.residual.passed)
    output["verified"] = verified
    return output, EXIT_OK if verified else EXIT_UNKNOWN


def cmd_min_eig(args: argparse.Namespace, config: CertifierConfig) -> Result:
    f = read_matrix(args.target)
    pres = _presentation(args, f.n, None)
    report = sample_region(
        pres, args.count or config.sample_count, args.box or config.box_radius, config.seed
    )
    if report.accepted == 0:
        return {"accepted": 0, "draws": report.draws, "empty_suspected": report.empty_suspected}, EXIT_UNKNOWN
    stats = min_eig_stats(f, report.points)
    return {
        "minimum": stats.minimum,
        "argmin": list(stats.argmin),
        "histogram": list(stats.histogram),
        "bin_edges": list(stats.bin_edges),
        "count": stats.count,
        "draws": report.draws,
    }, EXIT_OK


def cmd_selfcheck(args: argparse.Namespace, config: CertifierConfig) -> Result:
    x = ScalarPoly.variable(1, 0)
    f = MatrixPoly.from_scalar(x * x + 1)
    outcome = find_membership(f, ModulePresentation(1, 1), 1, config.override(exact=True))
    ok = outcome.verdict is Verdict.FOUND and bool(outcome.certificate and outcome.certificate.exact)
    return {"status": "ok" if ok else "degraded", "version": __version__, "numpy": np.__version__}, (
        EXIT_OK if ok else EXIT_UNKNOWN
    )


def schemas() -> dict[str, Any]:
    models: dict[str, type[BaseModel]] = {
        "MatrixPoly": MatrixPolyModel,
        "ModulePresentation": PresentationModel,
        "Certificate": CertificateModel,
        "State": StateModel,
        "PointVectorPair": PairModel,
        "SearchOutcome": OutcomeModel,
        "Envelope": Envelope,
        "ErrorModel": ErrorModel,
    }
    return {name: model.model_json_schema() for name, model in models.items()}


def cmd_print_schemas(args: argparse.Namespace, config: CertifierConfig) -> Result:
    return schemas(), EXIT_OK


COMMANDS: dict[str, Callable[[argparse.Namespace, CertifierConfig], Result]] = {
    "check-membership": cmd_check_membership,
    "nnsd": cmd_nnsd,
    "factor-univariate": cmd_factor_univariate,
    "diagonalize": cmd_diagonalize,
    "arch-witness": cmd_arch_witness,
    "real-eig-cert": cmd_real_eig_cert,
    "verify": cmd_verify,
    "verify-point": cmd_verify_point,
    "sample": cmd_sample,
    "product-module": cmd_product_module,
    "lower-bound": cmd_lower_bound,
    "min-eig": cmd_min_eig,
    "selfcheck": cmd_selfcheck,
    "print-schemas": cmd_print_schemas,
}


# =============================================================================
# MAIN
# =============================================================================


def _exit_for(exc: CertifierError) -> int:
    return EXIT_INPUT if exc.error_type in {"input_error", "config_error"} else EXIT_UNKNOWN


def _emit(envelope: Envelope, json_out: Path | None) -> None:
    text = render(envelope)
    print(text)
    if json_out is not None:
        json_out.write_text(text + "\n", encoding="utf-8")


def main(argv: Sequence[str] | None = None) -> int:
    """Main entry point"""
    parser = create_argument_parser()
    args = parser.parse_args(argv)
    if not args.command:
        parser.print_help()
        return EXIT_INPUT

    started = time.perf_counter()
    input_data = _input_record(args)
    try:
        config = load_config(
            args.config,
            feas_tol=args.tol,
            dmax=args.dmax,
            seed=args.seed,
            exact=args.exact,
            branch_cap=args.branch_cap,
            log_level=args.log_level,
        )
    except CertifierError as exc:
        setup_logging("ERROR")
        _emit(build_envelope(args.command, input_data, error=error_model(exc), seed=args.seed), args.json_out)
        return EXIT_INPUT

    setup_logging(config.log_level)
    log_event(logger, "cli.start", command=args.command, seed=config.seed)

    output: dict[str, Any] | None = None
    error: ErrorModel | None = None
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        try:
            output, code = COMMANDS[args.command](args, config)
        except CertifierError as exc:
            error = error_model(exc)
            code = _exit_for(exc)
    if output is not None and caught:
        output["warnings"] = [str(w.message) for w in caught]

    elapsed = round((time.perf_counter() - started) * 1000.0, 3)
    envelope = build_envelope(
        args.command, input_data, output, error, seed=config.seed, elapsed_ms=elapsed
    )
    try:
        _emit(envelope, args.json_out)
    except OSError as exc:
        print(f"cannot write {args.json_out}: {exc}", file=sys.stderr)
        code = EXIT_INPUT
    log_event(logger, "cli.finished", command=args.command, exit_code=code, elapsed_ms=elapsed)
    return code


if __name__ == "__main__":
    sys.exit(main())
