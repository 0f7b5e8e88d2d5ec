"""Command-line entry point.

Every command writes one JSON document (and, for ``solve``, per-``k`` CSV
files). Exit codes: 0 when all checks pass, 1 when a check fails,
2 for invalid parameters, 3 when the nonlinear solver does not converge.
The default output directory comes from ``CONFMETRIC_OUTPUT_DIR``.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from .barriers import (
    BarrierProfile,
    CollarGeometry,
    upper_barrier_check,
    verify_lower_barrier,
    verify_subsolution,
)
from .errors import DomainError, NonConvergenceError
from .geom import Background, Mode
from .solver import (
    Grid1D,
    ProblemSpec,
    asymptotic_extract,
    asymptotic_target,
    continuation,
    discretization_error,
    validate_problem,
)
from .symfun import (
    OperatorFamily,
    sample_cone,
    structural_selftest,
    transformed_ellipticity_bound,
    vartheta_empirical,
)

ENV_OUTPUT_DIR = "CONFMETRIC_OUTPUT_DIR"
EXIT_OK, EXIT_FAIL, EXIT_INVALID, EXIT_NONCONVERGENCE = 0, 1, 2, 3


class ValidationError(Exception):
    """Raised for parameter problems; maps to exit code 2."""


# ------------------------------------------------------------------ output


def _clean(obj):
    """Make ``obj`` strict-JSON serializable (non-finite floats become strings)."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_clean(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else ("inf" if x > 0 else "-inf" if x < 0 else "nan")
    return obj


def dumps(obj) -> str:
    return json.dumps(_clean(obj), sort_keys=True, indent=2) + "\n"


def atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _output_dir(args) -> Path:
    if getattr(args, "output_dir", None):
        return Path(args.output_dir)
    return Path(os.environ.get(ENV_OUTPUT_DIR, "."))


def _emit(args, default_name: str, payload: dict) -> None:
    text = dumps(payload)
    path = Path(args.output) if getattr(args, "output", None) else _output_dir(args) / default_name
    atomic_write(path, text)
    if not args.quiet:
        sys.stdout.write(text)


# ----------------------------------------------------------------- parsing


def parse_k_list(text: str) -> list[float]:
    """``start:end:xratio`` (geometric) or a comma-separated list."""
    try:
        if ":" in text:
            start, end, step = text.split(":")
            if not step.startswith("x"):
                raise ValueError
            a, b, q = float(start), float(end), float(step[1:])
            if a < 1 or b < a or q <= 1:
                raise ValueError
            out = []
            k = a
            while k <= b * (1 + 1e-12):
                out.append(k)
                k *= q
            return out
        vals = [float(x) for x in text.split(",") if x.strip()]
        if not vals:
            raise ValueError
        return vals
    except ValueError:
        raise ValidationError(f"bad k-list {text!r}: expected start:end:xratio with 1 <= start <= end and ratio > 1") from None


def _family(args) -> OperatorFamily:
    if args.k is None:
        raise ValidationError("--k (the sigma index) is required")
    if args.family == "sigma_k_root":
        return OperatorFamily.sigma_root(args.n, args.k)
    if args.l is None:
        raise ValidationError("--family sigma_quotient needs --l")
    return OperatorFamily.quotient(args.n, args.k, args.l)


def _mode(args) -> Mode:
    if args.mode == "einstein":
        if args.tau is not None:
            raise ValidationError("--tau applies to --mode schouten only")
        return Mode.einstein()
    if args.tau is None:
        raise ValidationError("--mode schouten needs --tau")
    return Mode.schouten(args.tau)


def _background(args) -> Background:
    outer = args.outer
    if outer is None:
        outer = 0.9 if args.background == "hyperbolic_ball" else 1.0
    return Background(args.background, args.n, args.inner, outer, args.curvature)


def _label(*parts) -> str:
    return "_".join(str(p).replace(".", "p") for p in parts if p is not None)


# ---------------------------------------------------------------- commands


def cmd_cone(args) -> int:
    fam = _family(args)
    cone = fam.cone
    rep = vartheta_empirical(fam, cone, args.samples, args.seed)
    payload = rep.to_json()
    checks = {"partial_ellipticity": rep.vartheta_empirical >= rep.vartheta_analytic - 1e-12}
    if rep.sharpness_min_ratio is not None and fam.k >= 2:
        checks["sharpness"] = rep.sharpness_min_ratio < 1e-6
    selftest = structural_selftest(fam, min(args.samples, 5000), args.seed)
    checks["structural"] = selftest["passed"]
    if rep.kappa == 0:
        payload["note"] = "kappa = 0 (Gamma = Gamma_n): no fully uniform rewriting exists; fully-uniform check skipped"
    if args.rho is not None:
        bound = transformed_ellipticity_bound(args.rho, rep.kappa, rep.vartheta_analytic, fam.n)
        pts = sample_cone(cone, min(args.samples, 10_000), args.seed + 1)
        _, grad = fam.value_and_gradient(pts)
        total = grad.sum(axis=1, keepdims=True)
        ratio = float(np.min((total - args.rho * grad) / ((fam.n - args.rho) * total)))
        payload["transformed"] = {"rho": args.rho, "bound": bound, "min_ratio": ratio}
        checks["transformed_ellipticity"] = ratio >= bound - 1e-10
    payload["family"] = fam.label
    payload["n"] = fam.n
    payload["checks"] = checks
    payload["pass"] = all(checks.values())
    _emit(args, f"cone_{_label('n' + str(fam.n), fam.kind, 'k' + str(fam.k), 'l' + str(fam.l) if fam.l else None)}.json", payload)
    return EXIT_OK if payload["pass"] else EXIT_FAIL


def cmd_barrier(args) -> int:
    n = args.n
    geo = CollarGeometry.flat(n) if args.shape_norm == 0 else CollarGeometry.with_shape_norm(n, args.shape_norm)
    if args.kind == "lower_hk":
        p = BarrierProfile("lower_hk", n, args.delta, 1.0 if args.k is None else args.k)
        rep = verify_lower_barrier(p, geo)
    elif args.kind == "upper_hbar":
        p = BarrierProfile("upper_hbar", n, args.delta)
        rep = upper_barrier_check(p, geo)
    else:
        kind = "subsolution_keps" if args.tau is None else "subsolution_keps_tau"
        k = 1.0 / args.delta if args.k is None else args.k
        p = BarrierProfile(kind, n, args.delta, k, args.eps, args.tau, args.psi_sup)
        fam = OperatorFamily.sigma_root(n, args.sigma)
        if args.tau is not None:
            validate_problem(ProblemSpec(Background("euclidean_ball", n), fam, Mode.schouten(args.tau)))
        rep = verify_subsolution(p, fam, args.psi_sup, geo)
    payload = rep.to_json()
    _emit(args, f"barrier_{_label(p.kind, 'n' + str(n), 'delta' + repr(args.delta))}.json", payload)
    return EXIT_OK if rep.passed else EXIT_FAIL


def _problem(args) -> ProblemSpec:
    bg = _background(args)
    if args.psi <= 0:
        raise ValidationError("--psi must be positive")
    return ProblemSpec(bg, _family(args), _mode(args), args.psi, 0.0)


def _run_continuation(args, spec: ProblemSpec, grid: Grid1D, k_list, prefix: str):
    out_dir = _output_dir(args)
    res = continuation(spec, grid, k_list)
    if args.csv:
        for rec in res.records:
            atomic_write(out_dir / f"{prefix}_k{rec.k:g}.csv", rec.to_csv())
    return res


def _summary(args, spec: ProblemSpec, grid: Grid1D, res) -> dict:
    summary = {
        "command": args.command,
        "mode": spec.mode.label,
        "n": spec.n,
        "family": spec.fam.label,
        "background": spec.bg.kind,
        "psi": args.psi,
        "grid_size": grid.m,
        "grading_beta": grid.beta,
        "continuation": res.to_json(),
    }
    if res.records:
        last = res.records[-1]
        summary["discretization_error"] = discretization_error(spec.with_boundary(math.log(last.k)), last, grid)
    target = asymptotic_target(spec.n, spec.mode, args.psi)
    summary["target"] = target
    limit = res.limit_record()
    if limit is not None:
        estimate, fit = asymptotic_extract(limit)
        summary["limit_estimate"] = estimate
        summary["deviation"] = estimate - target
        summary["fit"] = fit.to_json()
    return summary


def cmd_solve(args) -> int:
    spec = _problem(args)
    grid = Grid1D.graded(spec.bg, args.grid, args.grading)
    k_list = parse_k_list(args.k_list)
    prefix = _label("solve", spec.mode.label.replace("(", "").replace(")", "").replace("=", ""), "n" + str(spec.n), "m" + str(grid.m))
    res = _run_continuation(args, spec, grid, k_list, prefix)
    summary = _summary(args, spec, grid, res)
    summary["pass"] = res.failure_index is None and res.monotone and res.below_supersolution is not False
    _emit(args, f"{prefix}_summary.json", summary)
    if res.failure_index is not None:
        sys.stderr.write(f"error: solve for k = {k_list[res.failure_index]:g} failed: {res.failure_message}\n")
        return EXIT_NONCONVERGENCE
    return EXIT_OK if summary["pass"] else EXIT_FAIL


def cmd_asymptotics(args) -> int:
    spec = _problem(args)
    grid = Grid1D.graded(spec.bg, args.grid, args.grading)
    k_list = parse_k_list(args.k_list)
    prefix = _label("asymptotics", spec.mode.label.replace("(", "").replace(")", "").replace("=", ""), "n" + str(spec.n), "m" + str(grid.m))
    res = _run_continuation(args, spec, grid, k_list, prefix)
    summary = _summary(args, spec, grid, res)
    if res.failure_index is not None:
        _emit(args, f"{prefix}.json", summary)
        sys.stderr.write(f"error: solve for k = {k_list[res.failure_index]:g} failed: {res.failure_message}\n")
        return EXIT_NONCONVERGENCE
    summary["tolerance"] = args.tolerance
    summary["pass"] = bool(abs(summary["deviation"]) <= args.tolerance)
    _emit(args, f"{prefix}.json", summary)
    return EXIT_OK if summary["pass"] else EXIT_FAIL


def cmd_selftest(args) -> int:
    fam = _family(args)
    rep = structural_selftest(fam, args.samples, args.seed)
    rep["seed"] = args.seed
    _emit(args, f"selftest_{_label('n' + str(fam.n), fam.kind, 'k' + str(fam.k))}.json", rep)
    return EXIT_OK if rep["passed"] else EXIT_FAIL


# ------------------------------------------------------------------ parser


def _add_family(p, required_k: bool = True) -> None:
    p.add_argument("--n", type=int, required=True, help="dimension (>= 3)")
    p.add_argument("--family", choices=["sigma_k_root", "sigma_quotient"], default="sigma_k_root")
    p.add_argument("--k", type=int, required=required_k, help="sigma index k of the operator")
    p.add_argument("--l", type=int, default=None, help="lower index of a quotient family")


def _add_common(p) -> None:
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", default=None, help="JSON output path")
    p.add_argument("--output-dir", default=None, help=f"output directory (default ${ENV_OUTPUT_DIR} or .)")
    p.add_argument("--quiet", action="store_true", help="do not echo the JSON to stdout")


def _add_problem(p, grid: int, k_list: str) -> None:
    _add_family(p)
    p.add_argument("--mode", choices=["einstein", "schouten"], default="einstein")
    p.add_argument("--tau", type=float, default=None)
    p.add_argument("--psi", type=float, default=1.0, help="constant right-hand side psi > 0")
    p.add_argument("--background", choices=["euclidean_ball", "euclidean_annulus", "hyperbolic_ball", "round_sphere_band"], default="euclidean_ball")
    p.add_argument("--inner", type=float, default=0.0)
    p.add_argument("--outer", type=float, default=None)
    p.add_argument("--curvature", type=float, default=1.0, help="curvature magnitude of curved backgrounds")
    p.add_argument("--grid", type=int, default=grid, help="number of grid intervals m")
    p.add_argument("--grading", type=float, default=None, help="grading exponent beta of the radial map")
    p.add_argument("--k-list", default=k_list, help="continuation values, start:end:xratio")
    p.add_argument("--no-csv", dest="csv", action="store_false", help="skip the per-k CSV files")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="confmetric", description="Complete conformal metrics with prescribed curvature functions.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("cone", help="kappa, partial uniform ellipticity and sharpness for a family")
    _add_family(p)
    p.add_argument("--samples", type=int, default=100_000)
    p.add_argument("--rho", type=float, default=None, help="also check the transformed ellipticity bound at this rho")
    _add_common(p)
    p.set_defaults(func=cmd_cone)

    p = sub.add_parser("barrier", help="verify barrier inequalities on a model collar")
    p.add_argument("--kind", choices=["lower_hk", "upper_hbar", "subsolution"], required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--delta", type=float, default=0.01)
    p.add_argument("--k", type=float, default=None, help="profile parameter k (default 1, or 1/delta for subsolutions)")
    p.add_argument("--eps", type=float, default=0.1)
    p.add_argument("--tau", type=float, default=None, help="use the modified Schouten variant")
    p.add_argument("--psi-sup", type=float, default=1.0)
    p.add_argument("--sigma", type=int, default=1, help="sigma index of the operator for subsolution checks")
    p.add_argument("--shape-norm", type=float, default=0.0, help="top eigenvalue of Lap d g - Hess d (0 = flat)")
    _add_common(p)
    p.set_defaults(func=cmd_barrier)

    p = sub.add_parser("solve", help="continuation in k with boundary data log k")
    _add_problem(p, 512, "2:1024:x2")
    _add_common(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("asymptotics", help="boundary constant of the complete solution")
    _add_problem(p, 2048, "2:4096:x2")
    p.add_argument("--tolerance", type=float, default=2e-2)
    _add_common(p)
    p.set_defaults(func=cmd_asymptotics)

    p = sub.add_parser("selftest", help="structural checks of an operator family")
    _add_family(p)
    p.add_argument("--samples", type=int, default=20_000)
    _add_common(p)
    p.set_defaults(func=cmd_selftest)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValidationError, DomainError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_INVALID
    except NonConvergenceError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_NONCONVERGENCE


if __name__ == "__main__":
    sys.exit(main())
