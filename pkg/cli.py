"""replica_lab command-line entry point.

Usage:
  python cli.py rs-curve --model matrix --prior rademacher --delta-min 0.5 --delta-max 1.5 --steps 21
  python cli.py transition --model tensor --p 3 --delta-min 0.1 --delta-max 0.6 --steps 26
  python cli.py oracle --delta 2 --n 8 --samples 2000
  python cli.py verify sum-rule --n 4 --K 8 --eps 0.1 --samples 2000 --out report.json
  python cli.py verify telescoping --n 3 --K 4 --trials 100
  python cli.py diagnose concentration --n-list 2,4,6,8

Exit codes: 0 success, 1 failed verification, 2 usage or configuration error.
"""
from __future__ import annotations

import argparse
import logging
import sys
import time
from typing import Any, Callable, Sequence

import numpy as np

from config import settings
from config.settings import ConfigError, load_config_file
from replica_lab import fluctuation, interpolation
from replica_lab.disorder import (
    EnumerationCapError,
    MonteCarloDisorder,
    QuadratureDimensionError,
    QuadratureDisorder,
)
from replica_lab.gibbs_oracle import NISHIMORI_OBSERVABLES, finite_size_shift, free_energy, nishimori_residual
from replica_lab.prior import PriorError, prior_from_config
from replica_lab.rs_potential import (
    Matrix,
    minimize_potential,
    model_from_config,
    mutual_information,
    rs_curve,
    scan_and_locate_transition,
)
from replica_lab.scalar_channel import QuadratureOverflowError
from replica_lab.state import RunConfig
from services.logging_service import log_check_result, log_run_event, setup_logging
from services.report_service import Report, write_csv, write_report

logger = logging.getLogger("replica_lab.cli")

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_USAGE = 2

USAGE_ERRORS = (ConfigError, PriorError, EnumerationCapError, QuadratureDimensionError, QuadratureOverflowError)


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------

def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from e


def _common_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML run file; explicit flags override it")
    common.add_argument("--model", choices=["matrix", "tensor", "rle"])
    common.add_argument("--prior", help="rademacher, bernoulli[:rho], point-mass")
    common.add_argument("--delta", type=float)
    common.add_argument("--p", type=int)
    common.add_argument("--alpha", type=float)
    common.add_argument("--seed", type=int)
    common.add_argument("--threads", type=int)
    common.add_argument("--quad-order", dest="quad_order", type=int)
    common.add_argument("--t-quad-order", dest="t_quad_order", type=int)
    common.add_argument("--samples", type=int)
    common.add_argument("--n", type=int)
    common.add_argument("--K", dest="K", type=int)
    common.add_argument("--eps", "--epsilon", dest="epsilon", type=float)
    common.add_argument("--strict", action="store_true", default=None, help="2σ instead of 3σ acceptance")
    common.add_argument("--out", help="output file; stdout when absent")
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common_parser()
    parser = argparse.ArgumentParser(prog="replica_lab", description="Replica-symmetric formulas, checked at desk scale.")
    parser.add_argument("--version", action="version", version=f"{settings.APP_NAME} {settings.VERSION}")
    sub = parser.add_subparsers(dest="command", required=True)

    for name in ("rs-curve", "transition"):
        p = sub.add_parser(name, parents=[common])
        p.add_argument("--delta-min", dest="delta_min", type=float)
        p.add_argument("--delta-max", dest="delta_max", type=float)
        p.add_argument("--steps", type=int)
        p.add_argument("--grid", type=int)
        p.add_argument("--tol", type=float)

    p = sub.add_parser("oracle", parents=[common])
    p.add_argument("--method", choices=["mc", "quadrature"])
    p.add_argument("--order", type=int)

    verify = sub.add_parser("verify").add_subparsers(dest="check", required=True)
    for name in ("sum-rule", "telescoping", "dfdt", "t-gap", "nishimori", "fluctuation",
                 "concavity", "psi-identity", "perturbation-bound"):
        v = verify.add_parser(name, parents=[common])
        v.add_argument("--method", choices=["mc", "quadrature"])
        v.add_argument("--order", type=int)
        v.add_argument("--k", dest="k", type=int, default=1)
        v.add_argument("--t", dest="t", type=float, default=0.5)
        v.add_argument("--dt", type=float, default=1e-3)
        v.add_argument("--trials", type=int, default=100)
        v.add_argument("--K-list", dest="K_list", type=_int_list, default=[8, 16, 32, 64])
        v.add_argument("--trial", choices=["adapted", "argmin"], default="adapted")
        v.add_argument("--observable", choices=sorted(NISHIMORI_OBSERVABLES) + ["all"], default="all")
        v.add_argument("--spacing", type=float, default=1e-2)
        v.add_argument("--E", dest="E", type=float, default=1.0)

    diagnose = sub.add_parser("diagnose").add_subparsers(dest="check", required=True)
    for name in ("concentration", "fe-variance"):
        d = diagnose.add_parser(name, parents=[common])
        d.add_argument("--n-list", dest="n_list", type=_int_list, default=[2, 4, 6, 8])
    return parser


DEFAULTS: dict[str, Any] = {
    "model": "matrix", "prior": "rademacher", "delta": 1.0, "p": 3, "alpha": 1.0,
    "seed": settings.SEED, "threads": settings.THREADS, "quad_order": settings.QUAD_ORDER,
    "t_quad_order": settings.T_QUAD_ORDER, "samples": 2000, "n": 4, "K": 8, "epsilon": 0.0,
    "strict": False, "grid": settings.GRID, "tol": settings.GOLDEN_TOL,
    "delta_min": 0.5, "delta_max": 1.5, "steps": 21, "method": "mc", "order": 80, "out": None,
}


def resolve(args: argparse.Namespace) -> dict[str, Any]:
    """Merge explicit flags over the run file over built-in defaults."""
    file_values = load_config_file(args.config) if getattr(args, "config", None) else {}
    merged = {}
    for key, default in DEFAULTS.items():
        flag = getattr(args, key, None)
        merged[key] = flag if flag is not None else file_values.get(key, default)
    return merged


# Parsed subcommand flags echoed in every report, keyed by command.
SUBCOMMAND_INPUTS: dict[str, tuple[str, ...]] = {
    "rs-curve": ("delta_min", "delta_max", "steps"),
    "transition": ("delta_min", "delta_max", "steps"),
    "oracle": ("method", "order"),
    "verify": ("method", "order", "k", "t", "dt", "trials", "K_list", "trial", "observable", "spacing", "E"),
    "diagnose": ("n_list",),
}


def subcommand_inputs(args: argparse.Namespace, values: dict[str, Any]) -> dict[str, Any]:
    """Validate the subcommand's own flags and return them for the report echo.

    Raises:
        ConfigError: A flag is out of range for the requested command.
    """
    inputs = {key: values[key] if key in values else getattr(args, key) for key in SUBCOMMAND_INPUTS[args.command]}
    if getattr(args, "check", None) == "psi-identity":
        inputs["alpha"] = float(values["alpha"])
    checks = []
    if "delta_min" in inputs:
        lo, hi, steps = float(inputs["delta_min"]), float(inputs["delta_max"]), int(inputs["steps"])
        min_steps = 8 if args.command == "transition" else 2
        checks += [
            (0 < lo < hi, f"need 0 < delta_min < delta_max, got {lo}, {hi}"),
            (steps >= min_steps, f"steps must be >= {min_steps}, got {steps}"),
        ]
    if inputs.get("method") == "quadrature":
        checks.append((int(inputs["order"]) >= 2, f"order must be >= 2, got {inputs['order']}"))
    if args.command == "verify":
        K = int(values["K"])
        checks += [
            (1 <= inputs["k"] <= K, f"k must lie in 1..{K}, got {inputs['k']}"),
            (0.0 <= inputs["t"] <= 1.0, f"t must lie in [0, 1], got {inputs['t']}"),
            (inputs["dt"] > 0, f"dt must be positive, got {inputs['dt']}"),
            (inputs["trials"] >= 1, f"trials must be >= 1, got {inputs['trials']}"),
            (inputs["spacing"] > 0, f"spacing must be positive, got {inputs['spacing']}"),
            (inputs["E"] >= 0, f"E must be nonnegative, got {inputs['E']}"),
            (inputs["K_list"] and min(inputs["K_list"]) >= 1, f"K-list needs positive entries, got {inputs['K_list']}"),
        ]
        if args.check == "dfdt":
            checks.append((0 < inputs["t"] - inputs["dt"] and inputs["t"] + inputs["dt"] < 1,
                           f"need 0 < t - dt and t + dt < 1, got t={inputs['t']}, dt={inputs['dt']}"))
        if args.check == "telescoping":
            checks.append((K >= 2, f"telescoping needs K >= 2, got {K}"))
        if args.check == "t-gap":
            n = int(values["n"])
            checks.append((min(inputs["K_list"] or [0]) >= n, f"t-gap needs every K >= n={n}, got {inputs['K_list']}"))
    if args.command == "diagnose":
        checks.append((inputs["n_list"] and min(inputs["n_list"]) >= 1, f"n-list needs positive entries, got {inputs['n_list']}"))
    for ok, message in checks:
        if not ok:
            raise ConfigError(message)
    return inputs


def run_config(values: dict[str, Any], extra: dict[str, Any] | None = None) -> RunConfig:
    try:
        model = model_from_config(str(values["model"]), float(values["delta"]), int(values["p"]), float(values["alpha"]))
    except ValueError as e:
        raise ConfigError(str(e)) from e
    return RunConfig(
        model=model,
        prior=prior_from_config(values["prior"]),
        prior_spec=values["prior"],
        seed=int(values["seed"]),
        threads=int(values["threads"]),
        quad_order=int(values["quad_order"]),
        t_quad_order=int(values["t_quad_order"]),
        grid=int(values["grid"]),
        tol=float(values["tol"]),
        samples=int(values["samples"]),
        n=int(values["n"]),
        K=int(values["K"]),
        epsilon=float(values["epsilon"]),
        strict=bool(values["strict"]),
        output_path=values["out"],
        extra=dict(extra or {}),
    )


def _method(values: dict[str, Any], cfg: RunConfig):
    if values["method"] == "quadrature":
        return QuadratureDisorder(int(values["order"]))
    return MonteCarloDisorder(cfg.samples, cfg.seed, cfg.threads)


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_rs_curve(args, values, cfg: RunConfig) -> Report:
    deltas = np.linspace(float(values["delta_min"]), float(values["delta_max"]), int(values["steps"]))
    points = rs_curve(cfg.model, cfg.prior, [float(d) for d in deltas], cfg.quad_order, cfg.grid, cfg.tol, cfg.threads)
    rows = [(pt.delta, pt.m_star, pt.f_rs, pt.mutual_info_per_component) for pt in points]
    write_csv(["delta", "m_star", "f_rs", "mutual_info"], rows, cfg.output_path)
    return Report("rs-curve", cfg.echo(), {"rows": len(rows)})


def cmd_transition(args, values, cfg: RunConfig) -> Report:
    points, report = scan_and_locate_transition(
        cfg.model, cfg.prior, (float(values["delta_min"]), float(values["delta_max"])), int(values["steps"]),
        quad_order=cfg.quad_order, grid=cfg.grid, tol=cfg.tol, threads=cfg.threads,
    )
    outputs = report.to_dict()
    outputs["m_star"] = [pt.m_star for pt in points]
    outputs["deltas"] = [pt.delta for pt in points]
    return Report("transition", cfg.echo(), outputs)


def cmd_oracle(args, values, cfg: RunConfig) -> Report:
    method = _method(values, cfg)
    f_n, stderr = free_energy(cfg.model, cfg.prior, cfg.n, cfg.epsilon, method)
    m_star, f_rs = minimize_potential(cfg.model, cfg.prior, cfg.quad_order, cfg.grid, cfg.tol)
    slack = 2.0 * settings.FINITE_SIZE_SLACK / cfg.n
    shift = finite_size_shift(cfg.model, cfg.prior, cfg.n, m_star)
    outputs = {
        "f_n": f_n,
        "stderr": stderr,
        "mutual_info": mutual_information(cfg.model, cfg.prior, f_n),
        "m_star": m_star,
        "f_rs": f_rs,
        "finite_size_shift": shift,
        "f_rs_finite_n": f_rs + shift,
        "slack": slack,
    }
    checks = {"matches_rs": abs(f_n - f_rs - shift) <= cfg.sigmas * stderr + slack}
    return Report("oracle", cfg.echo(), outputs, checks=checks)


def _trial(cfg: RunConfig, mode: str) -> interpolation.TrialParameters:
    delta = cfg.model.delta
    if mode == "adapted":
        config = interpolation.PathConfig(cfg.n, cfg.K, cfg.epsilon)
        m, _ = interpolation.adapt_parameters(config, cfg.prior, delta, cfg.samples, cfg.seed, cfg.threads)
        return m
    m_star, _ = minimize_potential(Matrix(delta), cfg.prior, cfg.quad_order, cfg.grid, cfg.tol)
    return interpolation.TrialParameters.constant(m_star, cfg.K)


def _require_matrix(cfg: RunConfig) -> float:
    if not isinstance(cfg.model, Matrix):
        raise ConfigError("path checks are implemented for the matrix model only")
    return cfg.model.delta


def verify_sum_rule(args, values, cfg):
    delta = _require_matrix(cfg)
    config = interpolation.PathConfig(cfg.n, cfg.K, cfg.epsilon)
    m = _trial(cfg, args.trial)
    r = interpolation.sum_rule_residual(
        config, m, cfg.prior, delta, cfg.samples, cfg.seed, cfg.t_quad_order, cfg.sigmas, cfg.threads
    )
    outputs = {
        "lhs": r.lhs, "rhs": r.rhs, "residual": r.residual, "stderr": r.stderr, "slack": r.slack,
        "endpoint_shift": r.endpoint_shift, "rs_term": r.rs_term, "variance_term": r.variance_term,
        "remainder": r.remainder, "remainder_stderr": r.remainder_stderr,
        "finite_size_correction": r.finite_size_correction, "trial": r.trial,
    }
    checks = {"remainder_nonnegative": r.remainder_nonnegative, "upper_bound": r.upper_bound_holds}
    return outputs, r.passed and r.remainder_nonnegative, checks


def verify_telescoping(args, values, cfg):
    delta = _require_matrix(cfg)
    r = interpolation.pointwise_telescoping(cfg.prior, delta, cfg.n, cfg.K, args.trials, cfg.seed)
    return {"max_abs_difference": r.max_abs_difference, "trials": args.trials}, r.passed, {}


def verify_dfdt(args, values, cfg):
    delta = _require_matrix(cfg)
    m = _trial(cfg, "argmin")
    point = interpolation.path_point(args.k, args.t, cfg.epsilon, m, delta)
    r = interpolation.dfdt_check(point, m, cfg.prior, delta, cfg.n, cfg.samples, cfg.seed, args.dt, cfg.sigmas, cfg.threads)
    outputs = {
        "fd_value": r.fd_value, "formula_value": r.formula_value, "residual": r.residual,
        "stderr": r.stderr, "slack": r.slack, "finite_size_correction": r.finite_size_correction,
    }
    return outputs, r.passed, {}


def verify_t_gap(args, values, cfg):
    delta = _require_matrix(cfg)
    m_star, _ = minimize_potential(Matrix(delta), cfg.prior, cfg.quad_order, cfg.grid, cfg.tol)
    r = interpolation.t_gap_scaling(
        cfg.n, args.K_list, m_star, cfg.prior, delta, cfg.epsilon, cfg.samples, cfg.seed,
        k=args.k, t=args.t, threads=cfg.threads,
    )
    return {"K_list": r.K_list, "gaps": r.gaps, "stderrs": r.stderrs, "slope": r.slope}, r.passed, {}


def verify_nishimori(args, values, cfg):
    method = _method(values, cfg)
    names = sorted(NISHIMORI_OBSERVABLES) if args.observable == "all" else [args.observable]
    outputs, checks = {}, {}
    for name in names:
        r = nishimori_residual(cfg.model, cfg.prior, cfg.n, cfg.epsilon, NISHIMORI_OBSERVABLES[name], method)
        outputs[name] = {"lhs": r.lhs, "rhs": r.rhs, "residual": r.residual, "stderr": r.stderr}
        tolerance = 1e-8 if isinstance(method, QuadratureDisorder) else 0.0
        checks[name] = abs(r.residual) <= (cfg.sigmas + 1.0) * r.stderr + tolerance
    return outputs, all(checks.values()), checks


def _fluctuation_point(args, cfg):
    delta = _require_matrix(cfg)
    m = _argmin_trial(cfg)
    point = interpolation.path_point(args.k, args.t, cfg.epsilon, m, delta)
    if not point.effective_epsilon > 0:
        raise ConfigError(
            f"effective epsilon must be positive, got {point.effective_epsilon}; raise --eps or pick a prior with signal"
        )
    return delta, m, point


def _argmin_trial(cfg: RunConfig) -> interpolation.TrialParameters:
    m_star, _ = minimize_potential(cfg.model, cfg.prior, cfg.quad_order, cfg.grid, cfg.tol)
    return interpolation.TrialParameters.constant(m_star, cfg.K)


def verify_fluctuation(args, values, cfg):
    delta, m, point = _fluctuation_point(args, cfg)
    r = fluctuation.fluctuation_identity_check(point, m, cfg.prior, delta, cfg.n, _method(values, cfg), cfg.sigmas + 1.0)
    outputs = {
        "lhs": r.lhs, "rhs": r.rhs, "rhs_terms": r.rhs_terms, "residual": r.residual, "stderr": r.stderr,
        "thermal_residual": r.thermal_residual, "disorder_residual": r.disorder_residual,
    }
    return outputs, r.passed, {}


def verify_concavity(args, values, cfg):
    delta, m, point = _fluctuation_point(args, cfg)
    if not point.effective_epsilon - max(args.spacing, 1e-3) > 0:
        raise ConfigError(f"spacing {args.spacing} reaches nonpositive effective epsilon {point.effective_epsilon}")
    method = _method(values, cfg)
    first = fluctuation.first_derivative_check(point, m, cfg.prior, delta, cfg.n, method, sigmas=cfg.sigmas)
    second = fluctuation.concavity_check(point, m, cfg.prior, delta, cfg.n, method, spacing=args.spacing, sigmas=cfg.sigmas)
    outputs = {
        "fd_first": first.fd_value, "formula_first": first.formula_value, "l_first": first.l_value,
        "first_residual": first.residual, "grid": second.grid,
        "second_differences": second.second_differences, "formula_second": second.formula_values,
        "second_residuals": second.residuals,
    }
    checks = {"first_derivative": first.passed, "concave": second.concave}
    return outputs, first.passed and second.passed, checks


def verify_psi_identity(args, values, cfg):
    alpha = cfg.model.alpha if hasattr(cfg.model, "alpha") else float(values["alpha"])
    order = max(cfg.t_quad_order, 32)
    r = interpolation.psi_integral_identity(args.E, alpha, cfg.model.delta, order)
    outputs = {"lhs": r.closed_form, "rhs": r.integral, "residual": r.residual, "stderr": 0.0}
    return outputs, abs(r.residual) < 1e-10, {}


def verify_perturbation_bound(args, values, cfg):
    delta = _require_matrix(cfg)
    config = interpolation.PathConfig(cfg.n, cfg.K, cfg.epsilon)
    r = interpolation.perturbation_bound_check(config, cfg.prior, delta, cfg.samples, cfg.seed, cfg.sigmas, cfg.threads)
    return {"difference": r.difference, "stderr": r.stderr, "bound": r.bound}, r.passed, {}


def diagnose_concentration(args, values, cfg):
    delta = _require_matrix(cfg)
    r = fluctuation.overlap_concentration_profile(
        cfg.prior, delta, args.n_list, cfg.K, cfg.epsilon, cfg.samples, cfg.seed, threads=cfg.threads
    )
    return {"n_list": r.n_list, "values": r.values, "stderrs": r.stderrs, "slope": r.slope}, r.passed, {}


def diagnose_fe_variance(args, values, cfg):
    r = fluctuation.free_energy_variance_profile(cfg.model, cfg.prior, args.n_list, cfg.samples, cfg.seed, cfg.threads)
    outputs = {"n_list": r.n_list, "values": r.values, "stderrs": r.stderrs, "slope": r.slope}
    return outputs, r.passed, {"decreasing": r.decreasing}


CHECKS: dict[str, Callable] = {
    "verify sum-rule": verify_sum_rule,
    "verify telescoping": verify_telescoping,
    "verify dfdt": verify_dfdt,
    "verify t-gap": verify_t_gap,
    "verify nishimori": verify_nishimori,
    "verify fluctuation": verify_fluctuation,
    "verify concavity": verify_concavity,
    "verify psi-identity": verify_psi_identity,
    "verify perturbation-bound": verify_perturbation_bound,
    "diagnose concentration": diagnose_concentration,
    "diagnose fe-variance": diagnose_fe_variance,
}

COMMANDS: dict[str, Callable] = {
    "rs-curve": cmd_rs_curve,
    "transition": cmd_transition,
    "oracle": cmd_oracle,
}


def _dispatch(args: argparse.Namespace, values: dict[str, Any], cfg: RunConfig) -> Report:
    if args.command in COMMANDS:
        return COMMANDS[args.command](args, values, cfg)
    name = f"{args.command} {args.check}"
    outputs, passed, checks = CHECKS[name](args, values, cfg)
    residual = outputs.get("residual", outputs.get("max_abs_difference"))
    stderr = outputs.get("stderr", 0.0)
    log_check_result(
        name,
        bool(passed),
        float(residual) if isinstance(residual, (int, float)) else float("nan"),
        float(stderr) if isinstance(stderr, (int, float)) else 0.0,
    )
    return Report(name, cfg.echo(), outputs, passed=bool(passed), checks=checks)


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

def run(argv: Sequence[str] | None = None) -> int:
    """Parse ``argv``, run one subcommand, emit its report, return the exit code."""
    setup_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code in (0, None) else EXIT_USAGE

    started = time.perf_counter()
    command = args.command if args.command in COMMANDS else f"{args.command} {args.check}"
    log_run_event("run_started", {"command": command})
    try:
        values = resolve(args)
        cfg = run_config(values, subcommand_inputs(args, values))
        report = _dispatch(args, values, cfg)
    except USAGE_ERRORS as e:
        logger.error(f"❌ {command}: {e}")
        sys.stderr.write(f"error: {e}\n")
        log_run_event("run_completed", {"command": command, "exit_code": EXIT_USAGE})
        return EXIT_USAGE

    report.wall_time = time.perf_counter() - started
    if args.command != "rs-curve":
        write_report(report, cfg.output_path)
    code = EXIT_FAILED if report.passed is False else EXIT_OK
    log_run_event("run_completed", {"command": command, "exit_code": code, "wall_time": report.wall_time})
    return code


if __name__ == "__main__":
    sys.exit(run())
