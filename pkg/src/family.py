"""
Explicit semistable unbounded solutions and their decay exponents.

For n >= 2k+8 and a nonnegative integrable h the profile
    u'(r) = r^{delta-1} (1 + int_0^r h)^{1/(k+1)}
solves S_k(D^2 u) = g(u) for the g obtained by reading S_k(D^2 u) back as a
function of u. This module builds those profiles, reconstructs g, computes
the exponent delta_{n,k} and the derivative exponents, and fits observed
decay rates.
"""

import logging
import math
from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import numpy as np
from scipy.integrate import cumulative_trapezoid

from errors import ConsistencyError, DomainError
from hessian_core import ProblemParams
from numerics import RadialGrid, cumulative_integrate
from radial_solver import Nonlinearity, RadialProfile
from stability import WeightSamples

logger = logging.getLogger(__name__)

DEFAULT_DECAY_WINDOW = (1e-6, 1e-2)
MIN_FIT_NODES = 200
IDENTITY_TOL = 1e-12


# ===== SOURCE FUNCTION h =====

@dataclass(frozen=True, eq=False)
class HFunction:
    """Nonnegative h on (0, 1]: zero, constant a, power a r^b (b > -1) or a table"""
    kind: str = "zero"
    a: float = 0.0
    b: float = 0.0
    table_r: Optional[np.ndarray] = None
    table_h: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.kind not in ("zero", "const", "pow", "table"):
            raise DomainError(f"unknown h kind {self.kind!r}")
        if self.kind in ("const", "pow") and self.a < 0.0:
            raise DomainError(f"h must be nonnegative, got coefficient {self.a}")
        if self.kind == "pow" and not self.b > -1.0:
            raise DomainError(f"power h needs exponent b > -1 for integrability, got {self.b}")
        if self.kind == "table":
            r = np.asarray(self.table_r, dtype=float)
            h = np.asarray(self.table_h, dtype=float)
            if r.ndim != 1 or r.size < 2 or h.shape != r.shape:
                raise DomainError("an h table needs matching r and h columns with at least 2 rows")
            if r[0] <= 0.0 or np.any(np.diff(r) <= 0.0):
                raise DomainError("h table radii must be positive and strictly increasing")
            if np.any(h < 0.0):
                bad = int(np.flatnonzero(h < 0.0)[0])
                raise DomainError(f"h table value is negative at row {bad}")
            object.__setattr__(self, "table_r", r)
            object.__setattr__(self, "table_h", h)

    @property
    def label(self) -> str:
        if self.kind == "const":
            return f"const:{self.a:g}"
        if self.kind == "pow":
            return f"pow:{self.a:g}:{self.b:g}"
        return self.kind

    def value(self, r):
        r = np.asarray(r, dtype=float)
        if self.kind == "zero":
            return np.zeros(r.shape)
        if self.kind == "const":
            return np.full(r.shape, self.a)
        if self.kind == "pow":
            return self.a * r ** self.b
        return np.interp(r, self.table_r, self.table_h)

    def integral(self, r):
        """int_0^r h(s) ds"""
        r = np.asarray(r, dtype=float)
        if self.kind == "zero":
            return np.zeros(r.shape)
        if self.kind == "const":
            return self.a * r
        if self.kind == "pow":
            return self.a * r ** (self.b + 1.0) / (self.b + 1.0)
        tr, th = self.table_r, self.table_h
        running = th[0] * tr[0] + np.concatenate([[0.0], cumulative_trapezoid(th, tr)])
        j = np.clip(np.searchsorted(tr, r, side="right") - 1, 0, tr.size - 1)
        here = np.interp(r, tr, th)
        inside = running[j] + (r - tr[j]) * (th[j] + here) / 2.0
        below = th[0] * r
        above = running[-1] + th[-1] * (r - tr[-1])
        return np.where(r <= tr[0], below, np.where(r >= tr[-1], above, inside))

    def derivative(self, r):
        r = np.asarray(r, dtype=float)
        if self.kind in ("zero", "const"):
            return np.zeros(r.shape)
        if self.kind == "pow":
            return self.a * self.b * r ** (self.b - 1.0)
        slopes = np.gradient(self.table_h, self.table_r)
        inside = (r >= self.table_r[0]) & (r <= self.table_r[-1])
        return np.where(inside, np.interp(r, self.table_r, slopes), 0.0)


@dataclass(frozen=True, eq=False)
class FamilySpec:
    params: ProblemParams
    h: HFunction
    grid: RadialGrid

    def __post_init__(self):
        n, k = self.params.n, self.params.k
        if n < 2 * k + 8:
            raise DomainError(
                f"the explicit family needs n >= 2k+8 = {2 * k + 8}; n={n} is in the bounded regime")
        values = self.h.value(self.grid.nodes)
        if np.any(values < 0.0):
            bad = int(np.flatnonzero(values < 0.0)[0])
            raise DomainError(f"h is negative at node {bad} (r={self.grid.nodes[bad]:.6e})")


# ===== EXPONENTS =====

def _radicand(n: int, k: int) -> float:
    if not 1 <= k <= n:
        raise DomainError(f"need 1 <= k <= n, got n={n}, k={k}")
    radicand = 2.0 * (k + 1) * n - 4.0 * k
    if radicand < 0.0:
        raise DomainError(f"negative radicand 2(k+1)n - 4k = {radicand} for n={n}, k={k}")
    return radicand


def delta_factored(n: int, k: int) -> float:
    """-(sqrt(R) + 2k)(n - 2k - 8) / ((k+1)(sqrt(R) + 2k + 4)), R = 2(k+1)n - 4k"""
    root = math.sqrt(_radicand(n, k))
    return -(root + 2 * k) * (n - 2 * k - 8) / ((k + 1) * (root + 2 * k + 4))


def delta_nk(n: int, k: int) -> float:
    """Decay exponent; zero exactly at n = 2k+8, negative above"""
    root = math.sqrt(_radicand(n, k))
    direct = (-(k + 1) * n + 2.0 * root + 2 * k * k + 6 * k) / (k + 1) ** 2
    factored = delta_factored(n, k)
    if abs(direct - factored) > IDENTITY_TOL * max(1.0, abs(direct)):
        raise ConsistencyError(f"delta forms disagree for n={n}, k={k}: {direct!r} vs {factored!r}")
    return direct


def verbatim_exponents(n: int, k: int) -> Tuple[float, float, float]:
    """Exponents of |u'|, |u''| and |u'''| in their displayed (unsimplified) form"""
    root = math.sqrt(_radicand(n, k))
    scale = (k + 1) ** 2
    base = -(k + 1) * n + 2.0 * root
    first = (base + k * k + 4 * k - 1) / scale
    second = (base + 2 * k - 2) / scale
    third = (base - k * k - 3) / scale
    return first, second, third


def classify_regime(n: int, k: int) -> str:
    """bounded (n < 2k+8), log (n = 2k+8) or power (n > 2k+8)"""
    critical = 2 * k + 8
    if n < critical:
        return "bounded"
    if n == critical:
        return "log"
    return "power"


@dataclass(frozen=True)
class ExponentSet:
    delta: float
    u_rate: float
    du_rate: float
    d2u_rate: float
    d3u_rate: float
    regime: str

    def to_dict(self) -> dict:
        return {"delta": self.delta, "u_rate": self.u_rate, "du_rate": self.du_rate,
                "d2u_rate": self.d2u_rate, "d3u_rate": self.d3u_rate, "regime": self.regime}


def estimate_exponents(params: ProblemParams) -> ExponentSet:
    """delta and the derivative rates delta-1, delta-2, delta-3, checked against the displayed forms"""
    n, k = params.n, params.k
    delta = delta_nk(n, k)
    simplified = (delta - 1.0, delta - 2.0, delta - 3.0)
    for order, (shown, simple) in enumerate(zip(verbatim_exponents(n, k), simplified), start=1):
        if abs(shown - simple) > IDENTITY_TOL * max(1.0, abs(simple)):
            raise ConsistencyError(f"derivative exponent {order} for n={n}, k={k}: {shown!r} vs {simple!r}")
    return ExponentSet(delta, delta, *simplified, classify_regime(n, k))


def hardy_parameters(params: ProblemParams) -> Tuple[float, float]:
    """alpha = 2 sqrt(2(k+1)n - 4k)/(k+1), beta = (k-1)/(k+1); alpha^2/4 - beta^2 = (2n-k-1)/(k+1)"""
    n, k = params.n, params.k
    alpha = 2.0 * math.sqrt(_radicand(n, k)) / (k + 1)
    beta = (k - 1) / (k + 1)
    target = (2 * n - k - 1) / (k + 1)
    if abs(alpha * alpha / 4.0 - beta * beta - target) > IDENTITY_TOL * max(1.0, target):
        raise ConsistencyError(f"Hardy parameter identity fails for n={n}, k={k}")
    return alpha, beta


def skfactor_pair(n: int, k: int) -> Tuple[float, float]:
    """(n + k(delta - 2), 8 - delta); equal only at n = 2k+8"""
    delta = delta_nk(n, k)
    return n + k * (delta - 2.0), 8.0 - delta


# ===== CONSTRUCTION =====

def _pieces(spec: FamilySpec, r):
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0.0):
        raise DomainError("family quantities need r > 0")
    return r, 1.0 + spec.h.integral(r), spec.h.value(r)


def build_family(spec: FamilySpec) -> Tuple[WeightSamples, RadialProfile]:
    """
    Hardy weight V = r^{(k+1)(delta-2)+2} (1 + H) and the profile with
    u' = r^{delta-1} (1 + H)^{1/(k+1)}, H = int_0^r h, normalized by u(1) = 0.
    """
    n, k = spec.params.n, spec.params.k
    delta = delta_nk(n, k)
    r, A, hv = _pieces(spec, spec.grid.nodes)
    q = 1.0 / (k + 1)
    du = r ** (delta - 1.0) * A ** q
    d2u = (delta - 1.0) * r ** (delta - 2.0) * A ** q + r ** (delta - 1.0) * hv * A ** (q - 1.0) / (k + 1)
    running = cumulative_integrate(du, spec.grid, log_variable=True)
    u = running - running[-1]
    if not np.all(np.diff(u) > 0.0):
        logger.warning("family profile is not strictly increasing on the grid")

    gamma = (k + 1) * (delta - 2.0) + 2.0
    V = r ** gamma * A
    dV = gamma * r ** (gamma - 1.0) * A + r ** gamma * hv
    return WeightSamples(spec.grid, V, dV), RadialProfile(spec.grid, u, du, d2u)


def family_sk(spec: FamilySpec, r):
    """c r^{k(delta-2)} (1+H)^{k/(k+1)} (n + k(delta-2) + k r h / ((k+1)(1+H)))"""
    n, k, c = spec.params.n, spec.params.k, spec.params.c_nk
    delta = delta_nk(n, k)
    r, A, hv = _pieces(spec, r)
    factor = n + k * (delta - 2.0) + k * r * hv / ((k + 1) * A)
    return c * r ** (k * (delta - 2.0)) * A ** (k / (k + 1)) * factor


def family_sk_derivative(spec: FamilySpec, r):
    """Analytic d/dr of family_sk"""
    n, k, c = spec.params.n, spec.params.k, spec.params.c_nk
    delta = delta_nk(n, k)
    r, A, hv = _pieces(spec, r)
    dh = spec.h.derivative(r)
    p = k * (delta - 2.0)
    q = k / (k + 1)
    F = n + p + q * r * hv / A
    dF = q * (hv + r * dh) / A - q * r * hv * hv / (A * A)
    return c * (p * r ** (p - 1.0) * A ** q * F
                + r ** p * q * A ** (q - 1.0) * hv * F
                + r ** p * A ** q * dF)


def reconstruct_g(spec: FamilySpec, profile: Optional[RadialProfile] = None) -> Nonlinearity:
    """
    Tabulated g with g(u(r)) = S_k(D^2 u)(r).

    g' is (dS_k/dr) / u', exact at the table nodes.
    """
    if profile is None:
        profile = build_family(spec)[1]
    r = profile.r
    if np.any(np.diff(profile.u) <= 0.0):
        bad = int(np.flatnonzero(np.diff(profile.u) <= 0.0)[0]) + 1
        raise DomainError(f"u is not strictly increasing at node {bad}; g cannot be parametrized by u")
    values = family_sk(spec, r)
    slopes = family_sk_derivative(spec, r) / profile.du
    label = f"family:n={spec.params.n}:k={spec.params.k}:h={spec.h.label}"
    return Nonlinearity.tabulated(profile.u, values, slopes, label=label)


# ===== DECAY =====

@dataclass(frozen=True)
class DecayFit:
    rate: float
    r_squared: float
    intercept: float
    nodes: int


def fit_decay(r, values, window: Tuple[float, float] = DEFAULT_DECAY_WINDOW) -> DecayFit:
    """Least-squares slope of log(values) against log r over the window"""
    r = np.asarray(r, dtype=float)
    values = np.asarray(values, dtype=float)
    lo, hi = window
    inside = (r >= lo) & (r <= hi)
    if inside.sum() < 2:
        raise DomainError(f"decay window [{lo:g}, {hi:g}] holds fewer than 2 nodes")
    if inside.sum() < MIN_FIT_NODES:
        logger.warning("decay window [%g, %g] holds only %d nodes", lo, hi, int(inside.sum()))
    samples = values[inside]
    if np.any(samples <= 0.0):
        bad = int(np.flatnonzero(inside)[np.flatnonzero(samples <= 0.0)[0]])
        raise DomainError(f"nonpositive sample at node {bad} (r={r[bad]:.6e}) inside the decay window")
    x, y = np.log(r[inside]), np.log(samples)
    slope, intercept = np.polyfit(x, y, 1)
    residual = y - (slope * x + intercept)
    spread = float(np.sum((y - y.mean()) ** 2))
    r_squared = 1.0 if spread == 0.0 else 1.0 - float(np.sum(residual ** 2)) / spread
    return DecayFit(float(slope), r_squared, float(intercept), int(inside.sum()))


def decay_baseline(profile: RadialProfile, delta: float) -> float:
    """Additive constant b with u - b ~ r^delta / delta near the origin (delta != 0)"""
    if delta == 0.0:
        raise DomainError("the logarithmic regime has no power-law baseline")
    r0 = profile.grid.r_min
    return float(profile.u[0] - r0 ** delta / delta)


def measure_decay(profile: RadialProfile, delta: float,
                  window: Tuple[float, float] = DEFAULT_DECAY_WINDOW) -> Dict[str, Optional[float]]:
    """Fitted rates of u, u', u'' over the window; the log regime reports rate(u') + 1"""
    r = profile.r
    du_fit = fit_decay(r, profile.du, window)
    d2u_fit = fit_decay(r, np.abs(profile.d2u), window) if profile.d2u is not None else None
    log_coefficient = None
    if delta == 0.0:
        fitted = du_fit.rate + 1.0
        inside = (r >= window[0]) & (r <= window[1])
        log_coefficient = float(np.polyfit(np.log(r[inside]), profile.u[inside], 1)[0])
        r_squared = du_fit.r_squared
    else:
        u_fit = fit_decay(r, np.abs(profile.u - decay_baseline(profile, delta)), window)
        fitted = u_fit.rate
        r_squared = u_fit.r_squared
    return {
        "fitted_rate": float(fitted),
        "fit_r_squared": float(r_squared),
        "du_rate": du_fit.rate,
        "d2u_rate": None if d2u_fit is None else d2u_fit.rate,
        "log_coefficient": log_coefficient,
    }


def estimate_shapes(params: ProblemParams, r) -> Tuple[np.ndarray, np.ndarray]:
    """Bound shapes for |u| and |u(r) - u(1)| in the regime of (n, k)"""
    r = np.asarray(r, dtype=float)
    regime = classify_regime(params.n, params.k)
    if regime == "bounded":
        return np.ones(r.shape), 1.0 - r
    if regime == "log":
        return np.abs(np.log(r)) + 1.0, np.abs(np.log(r))
    delta = delta_nk(params.n, params.k)
    return r ** delta, r ** delta - 1.0


def observed_constants(profile: RadialProfile, params: ProblemParams) -> Dict[str, float]:
    """Empirical constants max |u|/shape and max |u - u(1)|/shape over r < 1"""
    r = profile.r[:-1]
    u = profile.u[:-1]
    shape_u, shape_diff = estimate_shapes(params, r)
    return {
        "u_constant": float(np.max(np.abs(u) / shape_u)),
        "oscillation_constant": float(np.max(np.abs(u - profile.u[-1]) / shape_diff)),
    }
