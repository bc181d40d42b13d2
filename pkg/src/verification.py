"""
Invariant battery run by the verify command.

Each check returns a CheckResult; failures are data, never exceptions, unless
the library itself raises.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
from scipy.linalg import eigh

from bumps import default_bump_suite, random_bump_suite, weak_test_suite
from errors import ConfigError, KHessianError
from family import (FamilySpec, HFunction, build_family, classify_regime,
                    delta_nk, estimate_exponents, family_sk, hardy_parameters,
                    reconstruct_g, verbatim_exponents)
from hessian_core import (ProblemParams, RadialEigenpair, binomial_identity_failures, in_gamma_k,
                          quad_wSv, radial_hessian, radial_lower_bound,
                          s2_trace_form, sk_full, sk_radial, skij_matrix,
                          tangential_coefficient, principal_minor_sum)
from numerics import RadialGrid, TridiagonalPair, min_generalized_eig
from radial_solver import (Nonlinearity, constant_solution, integral_residual,
                           shoot_solve, weak_residual)
from stability import (WeightSamples, hardy_check, min_rayleigh,
                       q_radial_magnitude, q_ueta_identity_gap, ueta_test)

logger = logging.getLogger(__name__)

FAULTS = ("euler",)
RANDOM_CASES = 100
FD_CASES = 50
FD_STEP = 1e-5
FD_DIMENSION = 6


@dataclass
class CheckResult:
    name: str
    passed: bool
    max_deviation: float
    detail: Dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"name": self.name, "passed": bool(self.passed),
                "max_deviation": float(self.max_deviation), "detail": self.detail}


def _random_radial_case(rng: np.random.Generator, n: int):
    """Point x, eigenpair (lambda1 = u'', lambda2 = u'/r > 0) and the radial Hessian"""
    r = rng.uniform(0.1, 1.0)
    direction = rng.normal(size=n)
    x = r * direction / np.linalg.norm(direction)
    lambda1, lambda2 = float(rng.uniform(-2.0, 2.0)), float(rng.uniform(0.1, 2.0))
    radius = float(np.linalg.norm(x))
    pair = RadialEigenpair.from_derivatives(radius, lambda2 * radius, lambda1)
    return x, pair, radial_hessian(x, pair)


# ===== OPERATOR CHECKS =====

def check_radial_formula(rng, n_max: int) -> CheckResult:
    worst = 0.0
    for n in range(2, n_max + 1):
        for k in range(1, n + 1):
            params = ProblemParams(n, k)
            for _ in range(RANDOM_CASES):
                x, pair, H = _random_radial_case(rng, n)
                radial = sk_radial(pair.r, pair.lambda2 * pair.r, pair.lambda1, params)
                worst = max(worst, abs(sk_full(H, k) - radial) / (1.0 + abs(radial)))
    return CheckResult("radial_formula_oracle", worst <= 1e-10, worst, {"n_max": n_max})


def check_skij_finite_difference(rng, n_max: int) -> CheckResult:
    worst = 0.0
    for n in range(2, min(n_max, FD_DIMENSION) + 1):
        for k in range(1, n + 1):
            params = ProblemParams(n, k)
            for _ in range(FD_CASES):
                x, pair, H = _random_radial_case(rng, n)
                matrix, _ = skij_matrix(x, pair, params)
                fd = np.zeros((n, n))
                for i in range(n):
                    for j in range(n):
                        plus, minus = H.copy(), H.copy()
                        plus[i, j] += FD_STEP
                        minus[i, j] -= FD_STEP
                        fd[i, j] = (principal_minor_sum(plus, k) - principal_minor_sum(minus, k)) / (2 * FD_STEP)
                worst = max(worst, float(np.abs(fd - matrix).max()) / (1.0 + float(np.abs(matrix).max())))
    return CheckResult("skij_finite_difference", worst <= 1e-6, worst, {"step": FD_STEP})


def check_skij_equal_eigenvalues(rng, n_max: int) -> CheckResult:
    worst = 0.0
    for n in range(2, n_max + 1):
        for k in range(1, n + 1):
            params = ProblemParams(n, k)
            lam = float(rng.uniform(0.1, 2.0))
            x = rng.normal(size=n)
            pair = RadialEigenpair(lam, lam, float(np.linalg.norm(x)))
            matrix, _ = skij_matrix(x, pair, params)
            expected = k * params.c_nk * lam ** (k - 1) * np.eye(n)
            worst = max(worst, float(np.abs(matrix - expected).max()) / (1.0 + float(np.abs(expected).max())))
    return CheckResult("skij_equal_eigenvalues", worst <= 1e-12, worst)


def check_euler_identity(rng, n_max: int, inject_fault: Optional[str] = None) -> CheckResult:
    worst = 0.0
    bias = 1.0 + 1e-6 if inject_fault == "euler" else 1.0
    for n in range(2, n_max + 1):
        for k in range(1, n + 1):
            params = ProblemParams(n, k)
            for _ in range(RANDOM_CASES):
                x, pair, H = _random_radial_case(rng, n)
                matrix, _ = skij_matrix(x, pair, params)
                target = k * sk_radial(pair.r, pair.lambda2 * pair.r, pair.lambda1, params)
                traced = float(np.trace(matrix @ H)) * bias
                worst = max(worst, abs(traced - target) / (1.0 + abs(target)))
    return CheckResult("euler_identity", worst <= 1e-10, worst, {"fault_injected": inject_fault == "euler"})


def check_quadratic_form(rng, n_max: int) -> CheckResult:
    worst = 0.0
    for n in range(2, n_max + 1):
        for k in range(1, n + 1):
            params = ProblemParams(n, k)
            for _ in range(10):
                x, pair, _ = _random_radial_case(rng, n)
                w, v = rng.normal(size=n), rng.normal(size=n)
                matrix, _ = skij_matrix(x, pair, params)
                closed = quad_wSv(w, v, x, pair, params)
                product = float(w @ matrix @ v)
                worst = max(worst, abs(closed - product) / (1.0 + abs(product)))
    return CheckResult("quad_wsv_matrix", worst <= 1e-12, worst)


def check_cone_positivity(rng, n_max: int) -> CheckResult:
    """Tangential coefficient positive and the radial lower bound holds inside the cone"""
    failures = 0
    tested = 0
    worst = 0.0
    for n in range(2, n_max + 1):
        for k in range(1, n + 1):
            params = ProblemParams(n, k)
            for _ in range(RANDOM_CASES):
                x, pair, H = _random_radial_case(rng, n)
                if not in_gamma_k(pair.spectrum(n), k):
                    continue
                tested += 1
                grad = rng.normal(size=n)
                form = quad_wSv(grad, grad, x, pair, params)
                bound = radial_lower_bound(grad, x, pair, params)
                if tangential_coefficient(pair, params) <= 0.0 or form < bound - 1e-12 * (1.0 + bound):
                    failures += 1
                    worst = max(worst, bound - form)
    return CheckResult("cone_positivity", failures == 0, worst, {"tested": tested, "failures": failures})


def check_binomial_identities() -> CheckResult:
    failures = binomial_identity_failures(20)
    return CheckResult("binomial_identities", not failures, float(len(failures)), {"failures": failures})


def check_s2_identity(rng, n_max: int) -> CheckResult:
    worst = 0.0
    for n in range(2, n_max + 1):
        for _ in range(20):
            A = rng.normal(size=(n, n))
            H = 0.5 * (A + A.T)
            exact = sk_full(H, 2)
            worst = max(worst, abs(s2_trace_form(H) - exact) / (1.0 + abs(exact)))
    return CheckResult("s2_identity", worst <= 1e-10, worst)


def check_eigensolver(rng) -> CheckResult:
    worst = 0.0
    for m in range(2, 13):
        for _ in range(5):
            pair = TridiagonalPair(rng.normal(size=m), rng.normal(size=m - 1), rng.uniform(0.5, 2.0, size=m))
            value, vector = min_generalized_eig(pair)
            A, B = pair.dense()
            expected = float(eigh(A, B, eigvals_only=True)[0])
            worst = max(worst, abs(value - expected) / max(1.0, abs(expected)))
    return CheckResult("eigensolver_oracle", worst <= 1e-10, worst)


# ===== SOLUTION CHECKS =====

def check_constant_solution(grid: RadialGrid) -> CheckResult:
    """Shooting reproduces the g = const closed form; weak and integral residuals agree"""
    worst = 0.0
    detail = {}
    suite = weak_test_suite()
    for n, k in ((3, 1), (4, 2), (6, 3)):
        params = ProblemParams(n, k)
        g = Nonlinearity.constant(1.0)
        solved = shoot_solve(g, params, grid)
        exact = constant_solution(1.0, params, grid)
        error = float(np.abs(solved.u - exact.u).max())
        residual = integral_residual(solved, g, params).max_abs
        weak = max(abs(weak_residual(solved, g, xi, params)) for xi in suite)
        detail[f"{n},{k}"] = {"max_error": error, "integral_residual": residual, "weak_residual": weak}
        worst = max(worst, error, residual, weak)
    return CheckResult("constant_solution", worst <= 1e-6, worst, detail)


def _family_battery(grid: RadialGrid) -> List[FamilySpec]:
    specs = []
    for k in (1, 2, 3):
        for n in (2 * k + 8, 2 * k + 9, 2 * k + 12):
            for h in (HFunction("zero"), HFunction("const", a=1.0), HFunction("pow", a=1.0, b=1.0)):
                specs.append(FamilySpec(ProblemParams(n, k), h, grid))
    return specs


def check_ueta_identity(grid: RadialGrid, suite) -> CheckResult:
    worst = 0.0
    cases = [("const:3,1", ProblemParams(3, 1)), ("const:4,2", ProblemParams(4, 2))]
    for label, params in cases:
        profile = constant_solution(1.0, params, grid)
        g = Nonlinearity.constant(1.0)
        for eta in suite:
            gap = q_ueta_identity_gap(profile, g, eta, params)
            scale = q_radial_magnitude(profile, g, ueta_test(profile, eta), params)
            worst = max(worst, gap / scale)
    for n, k, h in ((10, 1, HFunction("zero")), (13, 2, HFunction("const", a=1.0)),
                    (18, 3, HFunction("pow", a=1.0, b=1.0))):
        spec = FamilySpec(ProblemParams(n, k), h, grid)
        _, profile = build_family(spec)
        g = reconstruct_g(spec, profile)
        for eta in suite:
            gap = q_ueta_identity_gap(profile, g, eta, spec.params)
            scale = q_radial_magnitude(profile, g, ueta_test(profile, eta), spec.params)
            worst = max(worst, gap / scale)
    return CheckResult("ueta_identity_gap", worst <= 1e-5, worst, {"relative_to": "form magnitude"})


def check_family_semistability(grid: RadialGrid) -> CheckResult:
    failures = []
    worst_sk = 0.0
    worst_eig = np.inf
    radii = np.geomspace(grid.r_min * 10.0, 1.0, 100)
    for spec in _family_battery(grid):
        _, profile = build_family(spec)
        g = reconstruct_g(spec, profile)
        report = min_rayleigh(profile, g, spec.params)
        radial = sk_radial(profile.r, profile.du, profile.d2u, spec.params)
        closed = family_sk(spec, profile.r)
        index = np.searchsorted(profile.r, radii).clip(0, grid.size - 1)
        gap = float(np.max(np.abs(radial[index] - closed[index]) / np.abs(closed[index])))
        worst_sk = max(worst_sk, gap)
        worst_eig = min(worst_eig, report.min_eig)
        if report.verdict != "semistable" or gap > 1e-6:
            failures.append({"n": spec.params.n, "k": spec.params.k, "h": spec.h.label,
                             "verdict": report.verdict, "min_eig": report.min_eig, "sk_gap": gap})
    return CheckResult("family_semistability", not failures, worst_sk,
                       {"specs": 27, "lowest_min_eig": worst_eig, "failures": failures})


def check_hardy_suite(grid: RadialGrid, rng) -> CheckResult:
    suite = random_bump_suite(rng, 50)
    failures = []
    worst = 0.0
    cases = []
    for n in (3, 5, 10):
        params = ProblemParams(n, 1)
        weight = WeightSamples(grid, np.ones(grid.size), np.zeros(grid.size))
        cases.append((f"V=1,n={n}", weight, float(n - 2), 0.0, params))
    for spec in _family_battery(grid)[::3] + _family_battery(grid)[1::9]:
        weight, _ = build_family(spec)
        alpha, beta = hardy_parameters(spec.params)
        cases.append((f"family n={spec.params.n},k={spec.params.k},h={spec.h.label}",
                      weight, alpha, beta, spec.params))
    for label, weight, alpha, beta, params in cases:
        for eta in suite:
            result = hardy_check(weight, alpha, beta, params, eta)
            if not result.passed:
                failures.append({"case": label, "lhs": result.lhs, "conditions_ok": result.conditions_ok})
            worst = max(worst, result.quadrature_error)
    return CheckResult("hardy_suite", not failures, worst, {"cases": len(cases), "failures": failures[:10]})


# ===== EXPONENT CHECKS =====

def check_exponent_identities() -> CheckResult:
    worst = 0.0
    pairs = 0
    for k in range(1, 27):
        for n in range(2 * k + 8, 61):
            delta = delta_nk(n, k)
            shown = verbatim_exponents(n, k)
            worst = max(worst, *(abs(s - (delta - i)) for i, s in enumerate(shown, start=1)))
            gamma = (k + 1) * (delta - 2.0) + 2.0
            worst = max(worst, abs((k - 1) / (k + 1) + gamma / (k + 1) - (delta - 1.0)))
            alpha, beta = hardy_parameters(ProblemParams(n, k))
            worst = max(worst, abs(alpha ** 2 / 4 - beta ** 2 - (2 * n - k - 1) / (k + 1)))
            pairs += 1
    return CheckResult("exponent_identities", worst <= 1e-12, worst, {"pairs": pairs})


def check_regime_partition() -> CheckResult:
    failures = []
    worst = 0.0
    for k in range(1, 6):
        for n in range(max(k, 2), 41):
            regime = classify_regime(n, k)
            delta = delta_nk(n, k)
            cases = [n < 2 * k + 8, n == 2 * k + 8, n > 2 * k + 8]
            zero = abs(delta) <= 1e-12
            if sum(cases) != 1 or zero != (n == 2 * k + 8) or regime != estimate_exponents(ProblemParams(n, k)).regime:
                failures.append((n, k))
            if n == 2 * k + 8:
                worst = max(worst, abs(delta))
    return CheckResult("regime_partition", not failures, worst, {"failures": failures})


# ===== BATTERY =====

def run_all(n_max: int = 8, seed: int = 42, inject_fault: Optional[str] = None,
            grid: Optional[RadialGrid] = None, suite=None) -> List[CheckResult]:
    """Run every check with a PCG64 stream seeded by seed"""
    if inject_fault is not None and inject_fault not in FAULTS:
        raise ConfigError(f"unknown fault {inject_fault!r}; choose from {', '.join(FAULTS)}")
    if not 2 <= n_max <= 12:
        raise ConfigError(f"n_max must lie in [2, 12], got {n_max}")
    rng = np.random.default_rng(seed)
    grid = grid or RadialGrid.build()
    suite = suite or default_bump_suite()

    checks: List[Tuple[str, Callable[[], CheckResult]]] = [
        ("radial_formula_oracle", lambda: check_radial_formula(rng, n_max)),
        ("skij_finite_difference", lambda: check_skij_finite_difference(rng, n_max)),
        ("skij_equal_eigenvalues", lambda: check_skij_equal_eigenvalues(rng, n_max)),
        ("euler_identity", lambda: check_euler_identity(rng, n_max, inject_fault)),
        ("quad_wsv_matrix", lambda: check_quadratic_form(rng, n_max)),
        ("cone_positivity", lambda: check_cone_positivity(rng, n_max)),
        ("binomial_identities", check_binomial_identities),
        ("s2_identity", lambda: check_s2_identity(rng, n_max)),
        ("eigensolver_oracle", lambda: check_eigensolver(rng)),
        ("constant_solution", lambda: check_constant_solution(grid)),
        ("ueta_identity_gap", lambda: check_ueta_identity(grid, suite)),
        ("family_semistability", lambda: check_family_semistability(grid)),
        ("hardy_suite", lambda: check_hardy_suite(grid, rng)),
        ("exponent_identities", check_exponent_identities),
        ("regime_partition", check_regime_partition),
    ]
    results = []
    for name, check in checks:
        try:
            result = check()
        except KHessianError as e:
            result = CheckResult(name, False, float("nan"), {"error": e.to_record()})
        logger.info("%s: %s (max deviation %.3e)", result.name, "pass" if result.passed else "FAIL",
                    result.max_deviation)
        results.append(result)
    return results
