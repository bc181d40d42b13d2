"""
Command-line front end of the radial k-Hessian toolkit.

Commands:
    solve   shoot for the radial solution of S_k(D^2 u) = g(u), u(1) = 0
    check   residuals and semistability verdict of a profile CSV
    family  explicit semistable family, reconstructed g and decay rates
    verify  invariant battery; exit 0 iff every check passes

Every command writes a schema-stable JSON report into --out.
"""

import argparse
import json
import logging
import sys
from dataclasses import dataclass
from typing import Dict, List, Optional

import numpy as np

from bumps import default_bump_suite, weak_test_suite
from errors import ConfigError, KHessianError
from family import (DEFAULT_DECAY_WINDOW, FamilySpec, build_family, classify_regime,
                    estimate_exponents, family_sk, hardy_parameters, measure_decay,
                    observed_constants, reconstruct_g, skfactor_pair)
from hessian_core import ProblemParams, sk_radial
from numerics import DEFAULT_NODES, DEFAULT_R_JOIN, DEFAULT_R_MIN, RadialGrid
from profile_io import ReportStore, load_bump_suite, parse_h, parse_nonlinearity, read_profile
from radial_solver import integral_residual, shoot_solve, weak_residual, weighted_sobolev_norm
from stability import hardy_check, min_rayleigh
from verification import FAULTS, run_all
from version import __version__, get_full_version_info, get_version_string

logger = logging.getLogger("khessian")

DEFAULT_SEED = 42
DEFAULT_TOL = 1e-8
RNG_NAME = "PCG64"

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_ERROR = 2

REPORT_KEYS = {
    "solve": ["u0", "residual_max", "boundary_error", "weak_residual_max"],
    "check": ["integral_residual_max", "weak_residual_max", "min_eig", "verdict", "threshold",
              "witness_energy"],
    "family": ["delta", "regime", "fitted_rate", "rate_gap", "fit_r_squared", "du_rate", "d2u_rate",
               "log_coefficient", "exponents", "semistable_verdict", "min_eig", "hardy_ok",
               "hardy_min_lhs", "integral_residual_max", "sk_match_max", "norm_finite", "skfactor",
               "observed_constants"],
    "verify": ["checks", "all_passed", "n_max", "inject_fault"],
}


@dataclass(frozen=True)
class RunConfig:
    """Validated settings of one command invocation"""
    command: str
    n: int
    k: int
    grid_min: float
    grid_nodes: int
    tol: float
    seed: int
    out_dir: str
    g_spec: Optional[str] = None
    h_spec: Optional[str] = None
    profile_path: Optional[str] = None
    n_max: int = 8
    inject_fault: Optional[str] = None
    bumps_path: Optional[str] = None

    @classmethod
    def from_args(cls, args: argparse.Namespace) -> "RunConfig":
        config = cls(
            command=args.command,
            n=args.n,
            k=args.k,
            grid_min=args.grid_min,
            grid_nodes=args.grid_nodes,
            tol=args.tol,
            seed=args.seed,
            out_dir=args.out,
            g_spec=getattr(args, "g", None),
            h_spec=getattr(args, "h", None),
            profile_path=getattr(args, "profile", None),
            n_max=getattr(args, "n_max", 8),
            inject_fault=getattr(args, "inject_fault", None),
            bumps_path=args.bumps,
        )
        config.validate()
        return config

    def validate(self) -> None:
        if not self.tol > 0.0:
            raise ConfigError(f"--tol must be positive, got {self.tol}")
        if not 0.0 < self.grid_min < DEFAULT_R_JOIN:
            raise ConfigError(f"--grid-min must lie in (0, {DEFAULT_R_JOIN}), got {self.grid_min}")
        if self.grid_nodes < 16:
            raise ConfigError(f"--grid-nodes must be at least 16, got {self.grid_nodes}")
        if self.command == "family":
            regime = classify_regime(self.n, self.k)
            if regime == "bounded":
                raise ConfigError(
                    f"family needs n >= 2k+8 = {2 * self.k + 8}; (n={self.n}, k={self.k}) "
                    f"is in the bounded regime")

    @property
    def params(self) -> ProblemParams:
        return ProblemParams(self.n, self.k)

    def grid(self) -> RadialGrid:
        return RadialGrid.build(self.grid_min, DEFAULT_R_JOIN, self.grid_nodes)

    def bump_suite(self):
        return load_bump_suite(self.bumps_path) if self.bumps_path else default_bump_suite()


def base_report(command: str, args: argparse.Namespace) -> Dict:
    """Report skeleton with every key of the command present"""
    report = {
        "command": command,
        "status": "ok",
        "error": None,
        "tool_version": __version__,
        "tool": get_full_version_info(),
        "seed": args.seed,
        "rng": RNG_NAME,
        "n": args.n,
        "k": args.k,
        "grid_min": args.grid_min,
        "grid_nodes": args.grid_nodes,
        "tol": args.tol,
        "g": getattr(args, "g", None),
        "h": getattr(args, "h", None),
    }
    report.update({key: None for key in REPORT_KEYS[command]})
    return report


# ===== COMMANDS =====

def cmd_solve(config: RunConfig, store: ReportStore, report: Dict) -> int:
    params = config.params
    g = parse_nonlinearity(config.g_spec)
    profile = shoot_solve(g, params, config.grid(), tol=config.tol)
    store.save_profile(profile, "profile.csv")
    report["u0"] = float(profile.u[0])
    report["residual_max"] = integral_residual(profile, g, params).max_abs
    report["boundary_error"] = abs(profile.boundary_value)
    report["weak_residual_max"] = max(abs(weak_residual(profile, g, xi, params)) for xi in weak_test_suite())
    return EXIT_OK


def cmd_check(config: RunConfig, store: ReportStore, report: Dict) -> int:
    params = config.params
    profile = read_profile(config.profile_path)
    g = parse_nonlinearity(config.g_spec)
    report["integral_residual_max"] = integral_residual(profile, g, params).max_abs
    report["weak_residual_max"] = max(abs(weak_residual(profile, g, xi, params)) for xi in weak_test_suite())
    stability = min_rayleigh(profile, g, params)
    report.update(stability.to_dict())
    return EXIT_OK


def cmd_family(config: RunConfig, store: ReportStore, report: Dict) -> int:
    params = config.params
    spec = FamilySpec(params, parse_h(config.h_spec), config.grid())
    weight, profile = build_family(spec)
    g = reconstruct_g(spec, profile)
    store.save_profile(profile, "family_profile.csv")
    store.save_nonlinearity(g, "family_g_table.csv")

    exponents = estimate_exponents(params)
    decay = measure_decay(profile, exponents.delta, DEFAULT_DECAY_WINDOW)
    report.update(decay)
    report["delta"] = exponents.delta
    report["regime"] = exponents.regime
    report["exponents"] = exponents.to_dict()
    report["rate_gap"] = abs(decay["fitted_rate"] - exponents.delta)

    stability = min_rayleigh(profile, g, params)
    report["semistable_verdict"] = stability.verdict
    report["min_eig"] = stability.min_eig

    alpha, beta = hardy_parameters(params)
    results = [hardy_check(weight, alpha, beta, params, eta) for eta in config.bump_suite()]
    report["hardy_ok"] = all(result.passed for result in results)
    report["hardy_min_lhs"] = min(result.lhs for result in results)

    report["integral_residual_max"] = integral_residual(profile, g, params).max_abs
    closed = family_sk(spec, profile.r)
    radial = sk_radial(profile.r, profile.du, profile.d2u, params)
    report["sk_match_max"] = float(np.max(np.abs(radial - closed) / closed))
    report["norm_finite"] = weighted_sobolev_norm(profile, params, (profile.grid.r_min, 1.0)).finite
    report["skfactor"] = dict(zip(("n_plus_k_delta_minus_2", "eight_minus_delta"), skfactor_pair(params.n, params.k)))
    report["observed_constants"] = observed_constants(profile, params)
    return EXIT_OK


def cmd_verify(config: RunConfig, store: ReportStore, report: Dict) -> int:
    results = run_all(config.n_max, config.seed, config.inject_fault, config.grid(), config.bump_suite())
    report["checks"] = [result.to_dict() for result in results]
    report["all_passed"] = all(result.passed for result in results)
    report["n_max"] = config.n_max
    report["inject_fault"] = config.inject_fault
    if not report["all_passed"]:
        report["status"] = "checks_failed"
        return EXIT_CHECK_FAILED
    return EXIT_OK


COMMANDS = {"solve": cmd_solve, "check": cmd_check, "family": cmd_family, "verify": cmd_verify}


# ===== PARSER =====

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--n", type=int, default=3, help="dimension n (default 3)")
    common.add_argument("--k", type=int, default=1, help="Hessian order k (default 1)")
    common.add_argument("--grid-min", type=float, default=DEFAULT_R_MIN, help="first grid radius")
    common.add_argument("--grid-nodes", type=int, default=DEFAULT_NODES, help="number of grid nodes")
    common.add_argument("--tol", type=float, default=DEFAULT_TOL, help="solver tolerance")
    common.add_argument("--seed", type=int, default=DEFAULT_SEED, help="seed of the PCG64 stream")
    common.add_argument("--out", default=".", help="output directory for CSV and JSON files")
    common.add_argument("--bumps", default=None, help="CSV bump suite (center,width) replacing the default")
    common.add_argument("--verbose", "-v", action="store_true", help="debug logging")

    parser = argparse.ArgumentParser(prog="khessian", description="Radial k-Hessian equations toolkit")
    parser.add_argument("--version", action="version", version=get_version_string())
    sub = parser.add_subparsers(dest="command", required=True)

    solve = sub.add_parser("solve", parents=[common], help="shooting solve for u")
    solve.add_argument("--g", required=True, help="const:<c> | exp:<lambda> | power:<lambda>:<p> | table:<path>")

    check = sub.add_parser("check", parents=[common], help="residuals and stability of a profile CSV")
    check.add_argument("profile", help="profile CSV with header r,u,du[,d2u]")
    check.add_argument("--g", required=True, help="nonlinearity spec")

    family = sub.add_parser("family", parents=[common], help="explicit semistable family")
    family.add_argument("--h", default="zero", help="zero | const:<a> | pow:<a>:<b> | table:<path>")

    verify = sub.add_parser("verify", parents=[common], help="run the invariant battery")
    verify.add_argument("--n-max", type=int, default=8, help="largest dimension of the operator oracles")
    verify.add_argument("--inject-fault", choices=FAULTS, default=None, help="test hook: perturb one check")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)

    store = ReportStore(args.out)
    report = base_report(args.command, args)
    try:
        config = RunConfig.from_args(args)
        status = COMMANDS[args.command](config, store, report)
    except KHessianError as e:
        logger.error("%s failed: %s", args.command, e)
        report["status"] = "failed"
        report["error"] = e.to_record()
        status = EXIT_ERROR
    path = store.save_report(report, f"{args.command}_report.json")
    print(json.dumps({"report": str(path), "status": report["status"], "exit": status}))
    return status


if __name__ == "__main__":
    raise SystemExit(main())
