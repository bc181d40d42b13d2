"""
Semistability of radial solutions.

The stability quadratic form in its radial and g-free shapes, the identity
linking them, the discretized Rayleigh quotient with its verdict, the cutoff
family used to approach the origin, and the weighted Hardy-type check.
"""

import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from bumps import SampledFunction, sample
from errors import DomainError
from hessian_core import ProblemParams
from numerics import (RadialGrid, TridiagonalPair, integrate, integrate_smooth,
                      min_generalized_eig)
from radial_solver import RadialProfile, gprime_values

logger = logging.getLogger(__name__)

DEFAULT_STABILITY_THRESHOLD = 1e-8
EIGEN_TOL = 1e-10
CONDITION_RTOL = 1e-9
LIMIT_DECADES = 3


# ===== QUADRATIC FORMS =====

def _radial_terms(profile: RadialProfile, gprime, xi, params: ProblemParams):
    r = profile.r
    value, slope = sample(xi, r)
    n, k = params.n, params.k
    kinetic = k * params.c_nk * r ** (n - k) * profile.du ** (k - 1) * slope ** 2
    potential = gprime_values(gprime, profile.u) * value ** 2 * r ** (n - 1)
    return kinetic, potential


def q_radial(profile: RadialProfile, gprime, xi, params: ProblemParams) -> float:
    """int k c r^{n-k} (u')^{k-1} (xi')^2 + g'(u) xi^2 r^{n-1} dr"""
    kinetic, potential = _radial_terms(profile, gprime, xi, params)
    return integrate_smooth(kinetic + potential, profile.grid)


def q_radial_magnitude(profile: RadialProfile, gprime, xi, params: ProblemParams) -> float:
    """Same integral with |g'|; the scale against which form values are compared"""
    kinetic, potential = _radial_terms(profile, gprime, xi, params)
    return integrate_smooth(kinetic + np.abs(potential), profile.grid)


def q_gfree(profile: RadialProfile, eta, params: ProblemParams) -> float:
    """
    int (u'/r)^{k+1} [r^2 (eta')^2 + (k-1)/(k+1) 2 r eta eta' - (2n-k-1)/(k+1) eta^2] r^{n-1} dr

    (x, grad eta^2) is read as r (eta^2)' = 2 r eta eta'.
    """
    r = profile.r
    value, slope = sample(eta, r)
    n, k = params.n, params.k
    bracket = (r * r * slope ** 2
               + (k - 1) / (k + 1) * 2.0 * r * value * slope
               - (2 * n - k - 1) / (k + 1) * value ** 2)
    return integrate_smooth((profile.du / r) ** (k + 1) * bracket * r ** (n - 1), profile.grid)


def ueta_test(profile: RadialProfile, eta) -> SampledFunction:
    """The product u' eta with derivative u'' eta + u' eta'"""
    if profile.d2u is None:
        raise DomainError("the profile carries no u''; compute it with usecond_from_integral first")
    value, slope = sample(eta, profile.r)
    return SampledFunction(profile.r, profile.du * value, profile.d2u * value + profile.du * slope)


def q_ueta_identity_gap(profile: RadialProfile, gprime, eta, params: ProblemParams) -> float:
    """|Q(u' eta) - k c Q_gfree(eta)|; vanishes when the profile solves the equation"""
    lhs = q_radial(profile, gprime, ueta_test(profile, eta), params)
    rhs = params.k * params.c_nk * q_gfree(profile, eta, params)
    return abs(lhs - rhs)


# ===== RAYLEIGH QUOTIENT =====

@dataclass(frozen=True, eq=False)
class PencilAssembly:
    pair: Optional[TridiagonalPair]
    dofs: np.ndarray
    stiffness_scale: float


@dataclass(frozen=True, eq=False)
class StabilityReport:
    min_eig: float
    witness: np.ndarray
    verdict: str
    threshold: float
    witness_energy: float

    def to_dict(self) -> dict:
        return {
            "min_eig": None if np.isnan(self.min_eig) else float(self.min_eig),
            "verdict": self.verdict,
            "threshold": float(self.threshold),
            "witness_energy": None if np.isnan(self.witness_energy) else float(self.witness_energy),
        }


def assemble_pencil(profile: RadialProfile, gprime, params: ProblemParams) -> PencilAssembly:
    """
    Tridiagonal pencil of the radial form on hat functions at interior nodes.

    Stiffness uses element-averaged weights, the potential is lumped, and the
    mass is the lumped weight k c r^{n-3} (u'/r)^{k-1}. Nodes with u' = 0 and
    k >= 2 carry no weight and are left out.
    """
    n, k, c = params.n, params.k, params.c_nk
    r = profile.r
    du = profile.du
    h = np.diff(r)
    weight = k * c * r ** (n - k) * du ** (k - 1)
    stiff = 0.5 * (weight[:-1] + weight[1:]) / h
    lumped = 0.5 * (h[:-1] + h[1:])

    interior = np.arange(1, r.size - 1)
    kinetic_diag = stiff[:-1] + stiff[1:]
    potential = gprime_values(gprime, profile.u)[interior] * r[interior] ** (n - 1) * lumped
    mass = k * c * r[interior] ** (n - 3) * (du[interior] / r[interior]) ** (k - 1) * lumped

    keep = mass > 0.0
    if k >= 2:
        keep &= du[interior] > 0.0
    dofs = interior[keep]
    scale = float(kinetic_diag.max()) if kinetic_diag.size else 0.0
    if dofs.size == 0:
        return PencilAssembly(None, dofs, scale)

    diag = (kinetic_diag + potential)[keep]
    adjacent = np.diff(dofs) == 1
    off = np.where(adjacent, -stiff[dofs[:-1]], 0.0)
    return PencilAssembly(TridiagonalPair(diag, off, mass[keep]), dofs, scale)


def pencil_verdict(pair: TridiagonalPair, tau: float) -> Tuple[float, np.ndarray, str]:
    """Smallest pencil eigenvalue, its eigenvector and the verdict for the band -tau"""
    min_eig, vector = min_generalized_eig(pair, tol=EIGEN_TOL)
    verdict = "semistable" if min_eig >= -tau else "unstable"
    return min_eig, vector, verdict


def min_rayleigh(profile: RadialProfile, gprime, params: ProblemParams,
                 threshold: float = DEFAULT_STABILITY_THRESHOLD) -> StabilityReport:
    """Discretized minimum of Q over hats; semistable iff min_eig >= -threshold * max stiffness diagonal"""
    if np.any(profile.du < 0.0):
        bad = int(np.flatnonzero(profile.du < 0.0)[0])
        raise DomainError(f"u' is negative at node {bad} (r={profile.r[bad]:.6e})")
    assembly = assemble_pencil(profile, gprime, params)
    tau = threshold * assembly.stiffness_scale
    witness = np.zeros(profile.grid.size)
    if assembly.pair is None:
        logger.warning("all stability weights are degenerate; verdict inconclusive")
        return StabilityReport(float("nan"), witness, "inconclusive", tau, float("nan"))

    min_eig, vector, verdict = pencil_verdict(assembly.pair, tau)
    witness[assembly.dofs] = vector
    energy = float(np.dot(vector, assembly.pair.apply(vector)))
    logger.debug("min_rayleigh: %d dofs, min_eig=%.6e, tau=%.3e, verdict=%s",
                 assembly.dofs.size, min_eig, tau, verdict)
    return StabilityReport(float(min_eig), witness, verdict, tau, energy)


# ===== CUTOFF FAMILY =====

def _xi(t):
    return 2.0 * (1.0 - t) ** 2 * (2.5 - t)


def _xi_prime(t):
    return -6.0 * (1.0 - t) * (2.0 - t)


@dataclass(frozen=True)
class CutoffFamily:
    """Cutoffs vanishing near the origin; logarithmic when n = 2 sigma, linear rescale otherwise"""
    epsilon: float
    sigma: int
    n: int

    def __post_init__(self):
        if not 0.0 < self.epsilon < 1.0:
            raise DomainError(f"epsilon must lie in (0, 1), got {self.epsilon}")
        if self.sigma < 1:
            raise DomainError(f"sigma must be a positive integer, got {self.sigma}")
        if self.n < 2 * self.sigma:
            raise DomainError(f"cutoffs need n >= 2 sigma, got n={self.n}, sigma={self.sigma}")

    @property
    def logarithmic(self) -> bool:
        return self.n == 2 * self.sigma


def cutoff_eval(fam: CutoffFamily, r) -> Tuple[np.ndarray, np.ndarray]:
    """Cutoff value and r-derivative, one-sided at the joins"""
    r = np.asarray(r, dtype=float)
    eps = fam.epsilon
    value = np.zeros(r.shape)
    slope = np.zeros(r.shape)
    if fam.logarithmic:
        ramp = (r >= eps * eps) & (r < eps)
        t = np.log(np.where(ramp, r, eps)) / np.log(eps)
        value = np.where(ramp, 1.0 - _xi(t), value)
        slope = np.where(ramp, -_xi_prime(t) / (np.where(ramp, r, 1.0) * np.log(eps)), slope)
        value = np.where(r >= eps, 1.0, value)
    else:
        ramp = (r >= eps) & (r < 2.0 * eps)
        t = r / eps
        value = np.where(ramp, _xi(t), value)
        slope = np.where(ramp, _xi_prime(t) / eps, slope)
        value = np.where(r >= 2.0 * eps, 1.0, value)
    return value, slope


def choose_sigma(n: int, k: int, classical: bool = False) -> int:
    """sigma = 1 for classical solutions or n < 2k, sigma = k otherwise"""
    return 1 if classical or n < 2 * k else k


def cutoff_remainder(profile: RadialProfile, phi, fam: CutoffFamily, params: ProblemParams) -> float:
    """int (u')^{k-1} (2 phi phi' s s' + phi^2 s'^2) r^{n-k} dr for the cutoff s"""
    r = profile.r
    value, slope = sample(phi, r)
    cut, cut_slope = cutoff_eval(fam, r)
    integrand = (profile.du ** (params.k - 1)
                 * (2.0 * value * slope * cut * cut_slope + value ** 2 * cut_slope ** 2)
                 * r ** (params.n - params.k))
    return integrate_smooth(integrand, profile.grid)


# ===== HARDY-TYPE CHECK =====

@dataclass(frozen=True, eq=False)
class WeightSamples:
    """Radial weight V with its derivative on a grid"""
    grid: RadialGrid
    values: np.ndarray
    derivative: np.ndarray


@dataclass(frozen=True)
class HardyResult:
    lhs: float
    conditions_ok: bool
    growth_ok: bool
    limit_ok: bool
    quadrature_error: float

    @property
    def passed(self) -> bool:
        return self.conditions_ok and self.lhs >= -10.0 * self.quadrature_error

    def to_dict(self) -> dict:
        return {"lhs": self.lhs, "conditions_ok": self.conditions_ok, "growth_ok": self.growth_ok,
                "limit_ok": self.limit_ok, "quadrature_error": self.quadrature_error}


def _vanishes_at_origin(r: np.ndarray, f: np.ndarray) -> bool:
    """
    r^{n-2} V must drop by at least a factor 10 per decade over the innermost decades.

    A grid spanning fewer decades cannot show the limit and fails the test.
    """
    log_r = np.log10(r)
    points = log_r[0] + np.arange(LIMIT_DECADES + 1)
    if points[-1] > log_r[-1]:
        logger.warning("grid spans fewer than %d decades; limit condition not established", LIMIT_DECADES)
        return False
    tiny = np.finfo(float).tiny
    at_points = np.interp(points, log_r, f)
    if np.all(at_points <= tiny):
        return True
    levels = np.interp(points, log_r, np.log10(np.maximum(f, tiny)))
    return bool(np.all(np.diff(levels) >= 1.0 - CONDITION_RTOL))


def hardy_check(V: WeightSamples, alpha: float, beta: float, params: ProblemParams, eta) -> HardyResult:
    """
    Weighted Hardy-type inequality for the weight V.

    Conditions: alpha (r V' + (n - 2 beta - alpha - 2) V) >= 0 at every node
    and r^{n-2} V -> 0 at the origin. The left side is
    int r^{n-3} V [(r eta' + beta eta)^2 - alpha^2/4 eta^2] dr.
    """
    n = params.n
    r = V.grid.nodes
    values = np.asarray(V.values, dtype=float)
    slope_v = np.asarray(V.derivative, dtype=float)
    if np.any(values < 0.0):
        bad = int(np.flatnonzero(values < 0.0)[0])
        raise DomainError(f"weight V is negative at node {bad} (r={r[bad]:.6e})")

    shift = n - 2.0 * beta - alpha - 2.0
    growth = alpha * (r * slope_v + shift * values)
    slack = CONDITION_RTOL * abs(alpha) * (r * np.abs(slope_v) + abs(shift) * values)
    growth_ok = bool(np.all(growth >= -slack))
    limit_ok = _vanishes_at_origin(r, r ** (n - 2) * values)

    value, slope = sample(eta, r)
    integrand = r ** (n - 3) * values * ((r * slope + beta * value) ** 2 - 0.25 * alpha ** 2 * value ** 2)
    lhs = integrate_smooth(integrand, V.grid)
    error = abs(lhs - integrate(integrand, V.grid))
    return HardyResult(float(lhs), growth_ok and limit_ok, growth_ok, limit_ok, float(error))
