"""
Radial solutions of S_k(D^2 u) = g(u) on the unit ball.

Profiles, nonlinearities, integral and weak residuals, recovery of u' and u''
from the integral identity, the shooting solver and the weighted Sobolev norm.
Integrals over the ball are reduced to r-integrals; the common surface factor
is dropped everywhere.
"""

import logging
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Tuple

import numpy as np
from scipy.integrate import solve_ivp

from errors import (BracketError, ConvergenceError, DomainError,
                    StiffnessError)
from hessian_core import ProblemParams
from numerics import (RadialGrid, cumulative_integrate, find_root_bracketed,
                      integrate_smooth, integrate_window)
from bumps import sample

logger = logging.getLogger(__name__)

U_BLOWUP = 1e6
EXPONENT_CAP = 700.0
ODE_RTOL = 1e-11
ODE_ATOL = 1e-13
BRACKET_STEPS = 60


# ===== PROFILES =====

@dataclass(frozen=True, eq=False)
class RadialProfile:
    """Sampled u, u' and optionally u'' on a radial grid (read-only arrays)"""
    grid: RadialGrid
    u: np.ndarray
    du: np.ndarray
    d2u: Optional[np.ndarray] = None

    def __post_init__(self):
        for name in ("u", "du", "d2u"):
            values = getattr(self, name)
            if values is None:
                continue
            values = np.array(values, dtype=float)
            if values.shape != self.grid.nodes.shape:
                raise DomainError(f"profile column {name} has {values.size} entries, grid has {self.grid.size}")
            bad = np.flatnonzero(~np.isfinite(values))
            if bad.size:
                raise DomainError(f"profile column {name} is not finite at node {int(bad[0])}")
            values.setflags(write=False)
            object.__setattr__(self, name, values)

    @property
    def r(self) -> np.ndarray:
        return self.grid.nodes

    @property
    def boundary_value(self) -> float:
        return float(self.u[-1])

    def with_d2u(self, d2u) -> "RadialProfile":
        return replace(self, d2u=np.asarray(d2u, dtype=float))


def constant_solution(c: float, params: ProblemParams, grid: RadialGrid) -> RadialProfile:
    """Closed-form solution for g = c: u = a (r^2 - 1)/2 with a = (c/(n c_nk))^(1/k)"""
    if not c > 0.0:
        raise DomainError(f"constant nonlinearity must be positive, got {c}")
    a = (c / (params.n * params.c_nk)) ** (1.0 / params.k)
    r = grid.nodes
    return RadialProfile(grid, a * (r * r - 1.0) / 2.0, a * r, np.full(r.shape, a))


# ===== NONLINEARITIES =====

@dataclass(eq=False)
class Nonlinearity:
    """
    Evaluator pair (g, g') with a printable label.

    g and g' are pure functions of s. The only mutable state is _warned, set
    by a tabulated instance the first time it is evaluated outside its table
    so the extrapolation warning is logged once per instance.
    """
    kind: str
    label: str
    value_fn: Callable
    derivative_fn: Callable
    _warned: bool = field(default=False, repr=False)

    def g(self, s):
        return self.value_fn(np.asarray(s, dtype=float))

    def gprime(self, s):
        return self.derivative_fn(np.asarray(s, dtype=float))

    @classmethod
    def constant(cls, c: float) -> "Nonlinearity":
        c = float(c)
        return cls("const", f"const:{c:g}",
                   lambda s: np.full(np.shape(s), c) if np.ndim(s) else c,
                   lambda s: np.zeros(np.shape(s)) if np.ndim(s) else 0.0)

    @classmethod
    def exponential(cls, lam: float) -> "Nonlinearity":
        lam = float(lam)
        return cls("exp", f"exp:{lam:g}", lambda s: lam * np.exp(s), lambda s: lam * np.exp(s))

    @classmethod
    def power(cls, lam: float, p: float) -> "Nonlinearity":
        """lam (-s)^p for s <= 0, zero above"""
        lam, p = float(lam), float(p)
        if not p > 0.0:
            raise DomainError(f"power nonlinearity needs p > 0, got {p}")
        return cls("power", f"power:{lam:g}:{p:g}",
                   lambda s: lam * np.maximum(-s, 0.0) ** p,
                   lambda s: -lam * p * np.maximum(-s, 0.0) ** (p - 1.0))

    @classmethod
    def tabulated(cls, s_nodes, g_nodes, gprime_nodes=None, label: str = "table") -> "Nonlinearity":
        """
        Piecewise-linear table with constant extrapolation.

        Without an explicit g' column the derivative comes from centered
        differences in s (one-sided at the ends).
        """
        s_nodes = np.asarray(s_nodes, dtype=float)
        g_nodes = np.asarray(g_nodes, dtype=float)
        if s_nodes.ndim != 1 or s_nodes.size < 3 or g_nodes.shape != s_nodes.shape:
            raise DomainError("a nonlinearity table needs matching s and g columns with at least 3 rows")
        if np.any(np.diff(s_nodes) <= 0.0):
            bad = int(np.flatnonzero(np.diff(s_nodes) <= 0.0)[0]) + 1
            raise DomainError(f"table abscissae must be strictly increasing (row {bad})")
        if gprime_nodes is None:
            gprime_nodes = np.gradient(g_nodes, s_nodes, edge_order=2)
        gprime_nodes = np.asarray(gprime_nodes, dtype=float)
        lo, hi = float(s_nodes[0]), float(s_nodes[-1])
        table = cls("table", label, None, None)

        def clamp_check(s):
            if not table._warned and (np.any(s < lo) or np.any(s > hi)):
                logger.warning("nonlinearity %s evaluated outside [%.6g, %.6g]; using end values",
                               label, lo, hi)
                table._warned = True

        def value_fn(s):
            clamp_check(s)
            return np.interp(s, s_nodes, g_nodes)

        def derivative_fn(s):
            clamp_check(s)
            return np.interp(s, s_nodes, gprime_nodes)

        table.value_fn = value_fn
        table.derivative_fn = derivative_fn
        table.s_nodes, table.g_nodes, table.gprime_nodes = s_nodes, g_nodes, gprime_nodes
        return table


def gprime_values(gprime, u: np.ndarray) -> np.ndarray:
    if isinstance(gprime, Nonlinearity):
        return np.asarray(gprime.gprime(u), dtype=float)
    return np.asarray(gprime(u), dtype=float) * np.ones_like(u)


def _source(profile: RadialProfile, g: Nonlinearity) -> np.ndarray:
    values = np.asarray(g.g(profile.u), dtype=float) * np.ones_like(profile.u)
    bad = np.flatnonzero(~np.isfinite(values))
    if bad.size:
        i = int(bad[0])
        raise DomainError(f"g is not evaluable at node {i} (r={profile.r[i]:.6e}, u={profile.u[i]:.6e})")
    return values


def _accumulated_source(grid: RadialGrid, gvals: np.ndarray, params: ProblemParams) -> np.ndarray:
    """int_0^r s^{n-1} g(u(s)) ds with a power-law start term on (0, r_min)"""
    r = grid.nodes
    f = r ** (params.n - 1) * gvals
    start = f[0] * r[0] / params.n
    if f[0] > 0.0 and f[1] > 0.0:
        p = np.log(f[1] / f[0]) / np.log(r[1] / r[0])
        if p > -1.0:
            start = f[0] * r[0] / (p + 1.0)
    return cumulative_integrate(f, grid, initial=start, log_variable=True)


# ===== RESIDUALS =====

@dataclass(frozen=True, eq=False)
class IntegralResidual:
    residual: np.ndarray
    max_abs: float
    worst_node: int


def integral_residual(profile: RadialProfile, g: Nonlinearity, params: ProblemParams) -> IntegralResidual:
    """r^{n-k} (u')^k - c_nk^{-1} int_0^r s^{n-1} g(u) ds at every node"""
    if np.any(profile.du < 0.0):
        bad = int(np.flatnonzero(profile.du < 0.0)[0])
        raise DomainError(f"u' is negative at node {bad} (r={profile.r[bad]:.6e})")
    r = profile.r
    accumulated = _accumulated_source(profile.grid, _source(profile, g), params)
    residual = r ** (params.n - params.k) * profile.du ** params.k - accumulated / params.c_nk
    worst = int(np.argmax(np.abs(residual)))
    return IntegralResidual(residual, float(abs(residual[worst])), worst)


def recover_uprime(grid: RadialGrid, u, g: Nonlinearity, params: ProblemParams) -> np.ndarray:
    """u' = c_nk^{-1/k} (int_0^r s^{n-1} g(u) ds / r^{n-k})^{1/k}"""
    partial = RadialProfile(grid, u, np.zeros(grid.size))
    gvals = _source(partial, g)
    if np.any(gvals < 0.0):
        bad = int(np.flatnonzero(gvals < 0.0)[0])
        raise DomainError(f"g(u) is negative at node {bad} (r={grid.nodes[bad]:.6e})")
    accumulated = _accumulated_source(grid, gvals, params)
    ratio = np.maximum(accumulated, 0.0) / (params.c_nk * grid.nodes ** (params.n - params.k))
    return ratio ** (1.0 / params.k)


def usecond_from_integral(profile: RadialProfile, g: Nonlinearity,
                          params: ProblemParams) -> Tuple[np.ndarray, np.ndarray]:
    """
    u'' from the differentiated integral identity, plus a degeneracy mask.

    With J = r^{k-n} int_0^r s^{n-1} g(u) ds the identity gives
    u'' = c^{-1/k}/k * J^{(1-k)/k} * (r^{k-1} g(u) + (k-n) J / r).
    Nodes where J vanishes and k >= 2 are flagged and set to zero.
    """
    n, k = params.n, params.k
    r = profile.r
    gvals = _source(profile, g)
    accumulated = _accumulated_source(profile.grid, gvals, params)
    J = accumulated * r ** (k - n)
    degenerate = (J <= 0.0) if k >= 2 else np.zeros(r.shape, dtype=bool)
    safe_J = np.where(degenerate, 1.0, np.maximum(J, 0.0))
    slope = r ** (k - 1) * gvals + (k - n) * safe_J / r
    d2u = params.c_nk ** (-1.0 / k) / k * safe_J ** ((1.0 - k) / k) * slope
    d2u = np.where(degenerate, 0.0, d2u)
    if np.any(degenerate):
        logger.debug("u'' degenerate at %d nodes", int(degenerate.sum()))
    return d2u, degenerate


def classical_usecond(profile: RadialProfile, g: Nonlinearity, params: ProblemParams) -> np.ndarray:
    """u'' = g/(k c) (u'/r)^{1-k} - ((n-k)/k) u'/r"""
    n, k = params.n, params.k
    lam2 = profile.du / profile.r
    return _source(profile, g) / (k * params.c_nk) * lam2 ** (1 - k) - (n - k) / k * lam2


def weak_residual(profile: RadialProfile, g: Nonlinearity, xi, params: ProblemParams) -> float:
    """c_nk int r^{n-k} (u')^k xi' dr + int r^{n-1} g(u) xi dr"""
    r = profile.r
    value, slope = sample(xi, r)
    flux = params.c_nk * r ** (params.n - params.k) * profile.du ** params.k * slope
    source = r ** (params.n - 1) * _source(profile, g) * value
    return integrate_smooth(flux + source, profile.grid)


# ===== SHOOTING =====

def _integrate_from_center(u0: float, g: Nonlinearity, params: ProblemParams,
                           t_span: Tuple[float, float], t_eval=None):
    """
    Integrate in t = ln r with state (u, z = ln(r^{n-k} (u')^k)).

    Starts from the one-term expansion u' = a r, u = u0 + a r^2/2 where
    a = (g(u0)/(n c))^(1/k).
    """
    n, k, c = params.n, params.k, params.c_nk
    g0 = float(g.g(u0))
    if not g0 > 0.0:
        raise DomainError(f"g(u0) must be positive, got g({u0:.6g}) = {g0!r}")
    t0 = t_span[0]
    r0 = np.exp(t0)
    a = (g0 / (n * c)) ** (1.0 / k)
    y0 = [u0 + 0.5 * a * r0 * r0, np.log(g0 / (n * c)) + n * t0]

    def rhs(t, y):
        u, z = y
        du_dt = np.exp(min((z - (n - k) * t) / k + t, EXPONENT_CAP))
        dz_dt = np.exp(min(n * t - z, EXPONENT_CAP)) * float(g.g(u)) / c
        return [du_dt, dz_dt]

    def blow_up(t, y):
        return U_BLOWUP - y[0]

    blow_up.terminal = True
    solution = solve_ivp(rhs, t_span, y0, method="DOP853", rtol=ODE_RTOL, atol=ODE_ATOL,
                         t_eval=t_eval, events=blow_up)
    if solution.status == -1:
        raise StiffnessError(f"step control failed for u0={u0:.9g}: {solution.message}")
    return solution


def _boundary_map(g: Nonlinearity, params: ProblemParams, t_span) -> Callable[[float], float]:
    def boundary_value(u0: float) -> float:
        solution = _integrate_from_center(u0, g, params, t_span)
        if solution.status == 1:
            return U_BLOWUP
        return float(solution.y[0, -1])
    return boundary_value


def _auto_bracket(boundary_value, g: Nonlinearity) -> Tuple[float, float, float, float]:
    """Scan u0 = 0, -2^-10, -2^-9, ... for the first sign change of u(1)"""
    candidates = [0.0] + [-(2.0 ** j) for j in range(-10, BRACKET_STEPS - 10)]
    usable = [u0 for u0 in candidates if float(g.g(u0)) > 0.0]
    if not usable:
        raise DomainError("g is not positive at any trial value of u(0)")
    sampled = []
    prev_u0, prev_val = None, None
    for u0 in usable:
        val = boundary_value(u0)
        sampled.append((u0, val))
        logger.debug("bracket scan: u0=%.6g -> u(1)=%.6g", u0, val)
        if prev_val is not None and np.sign(val) != np.sign(prev_val):
            _check_monotone(sampled)
            return u0, prev_u0, val, prev_val
        if val == 0.0:
            return u0, u0, val, val
        prev_u0, prev_val = u0, val
    raise BracketError(f"no sign change of u(1) for u(0) in [{usable[-1]:.3g}, {usable[0]:.3g}]")


def _check_monotone(sampled) -> None:
    ordered = sorted(sampled)
    values = [v for _, v in ordered]
    if any(b < a for a, b in zip(values, values[1:])):
        logger.warning("u(1) is not monotone in u(0) over the sampled trials; the root may not be unique")


def shoot_solve(g: Nonlinearity, params: ProblemParams, grid: RadialGrid, tol: float = 1e-8,
                u0_bracket: Optional[Tuple[float, float]] = None) -> RadialProfile:
    """
    Solve c r^{1-n} (r^{n-k} (u')^k)' = g(u), u'(0) = u(1) = 0 by shooting on u(0).

    The outer problem is a Brent root search on u0 -> u(1; u0); the bracket is
    either supplied or found by scanning u0 downwards from 0.
    """
    if not tol > 0.0:
        raise DomainError(f"tolerance must be positive, got {tol}")
    t_nodes = np.log(grid.nodes)
    t_span = (float(t_nodes[0]), float(t_nodes[-1]))
    boundary_value = _boundary_map(g, params, t_span)

    if u0_bracket is not None:
        lo, hi = map(float, u0_bracket)
        f_lo, f_hi = boundary_value(lo), boundary_value(hi)
        _check_monotone([(lo, f_lo), (hi, f_hi)])
    else:
        lo, hi, f_lo, f_hi = _auto_bracket(boundary_value, g)

    u0 = find_root_bracketed(boundary_value, lo, hi, tol=tol * 1e-3, f_lo=f_lo, f_hi=f_hi)
    solution = _integrate_from_center(u0, g, params, t_span, t_eval=t_nodes)
    if solution.status != 0 or solution.y.shape[1] != grid.size:
        raise ConvergenceError(f"final trajectory for u0={u0:.9g} did not reach r=1", best=u0)

    u = solution.y[0]
    du = np.exp((solution.y[1] - (params.n - params.k) * t_nodes) / params.k)
    profile = RadialProfile(grid, u, du)
    profile = profile.with_d2u(classical_usecond(profile, g, params))

    if abs(profile.boundary_value) > tol:
        raise ConvergenceError(f"|u(1)| = {abs(profile.boundary_value):.3e} exceeds {tol:.1e}", best=profile)
    check = integral_residual(profile, g, params)
    if check.max_abs > 10.0 * tol:
        raise ConvergenceError(
            f"integral residual {check.max_abs:.3e} exceeds {10.0 * tol:.1e} at node {check.worst_node}",
            best=profile)
    logger.info("shooting converged: u0=%.12g, |u(1)|=%.2e, residual=%.2e",
                u0, abs(profile.boundary_value), check.max_abs)
    return profile


# ===== NORMS =====

@dataclass(frozen=True)
class SobolevNorm:
    value: float
    finite: bool


def weighted_sobolev_norm(profile: RadialProfile, params: ProblemParams,
                          annulus: Tuple[float, float] = (0.5, 1.0)) -> SobolevNorm:
    """
    (int_a^b r^{n-k} (|u|^{k+1} + |u'|^{k+1}) dr)^{1/(k+1)}.

    The weight |x|^{1-k} is applied to both terms. The finite flag requires
    the decade contributions next to the inner radius to be nondecreasing
    away from it.
    """
    a, b = annulus
    if a < profile.grid.r_min:
        raise DomainError(f"annulus inner radius {a} is below the grid start {profile.grid.r_min}")
    k = params.k
    r = profile.r
    integrand = r ** (params.n - k) * (np.abs(profile.u) ** (k + 1) + np.abs(profile.du) ** (k + 1))
    total = integrate_window(integrand, profile.grid, a, b)
    decades = [integrate_window(integrand, profile.grid, a * 10.0 ** j, min(a * 10.0 ** (j + 1), b))
               for j in range(3) if a * 10.0 ** (j + 1) <= b]
    finite = bool(np.isfinite(total)) and all(x <= y for x, y in zip(decades, decades[1:]))
    return SobolevNorm(float(max(total, 0.0) ** (1.0 / (k + 1))), finite)
