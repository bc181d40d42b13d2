"""
Shared numerical kernels for the radial k-Hessian toolkit.

Quadrature on nonuniform radial grids, the symmetric tridiagonal generalized
eigensolver (Sturm-count bisection plus inverse iteration), finite differences
and bracketed root finding.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional, Tuple

import numpy as np
from scipy.integrate import cumulative_simpson, simpson, trapezoid
from scipy.linalg import solve_banded
from scipy.optimize import brentq

from errors import BracketError, ConvergenceError, DomainError

logger = logging.getLogger(__name__)

DEFAULT_R_MIN = 1e-8
DEFAULT_R_JOIN = 0.1
DEFAULT_NODES = 4096
MIN_NODES = 16
R_FLOOR = 1e-12

BISECTION_CAP = 500
INVERSE_ITERATION_CAP = 4


# ===== GRID =====

@dataclass(frozen=True, eq=False)
class RadialGrid:
    """Strictly increasing radii in (0, 1] ending exactly at r = 1"""
    nodes: np.ndarray

    def __post_init__(self):
        nodes = np.array(self.nodes, dtype=float)
        if nodes.ndim != 1 or nodes.size < MIN_NODES:
            raise DomainError(f"a radial grid needs at least {MIN_NODES} nodes, got {nodes.size}")
        if not np.all(np.isfinite(nodes)):
            bad = int(np.flatnonzero(~np.isfinite(nodes))[0])
            raise DomainError(f"grid node {bad} is not finite")
        if nodes[0] < R_FLOOR:
            raise DomainError(f"first grid node {nodes[0]:.3e} is below {R_FLOOR:.0e}")
        steps = np.diff(nodes)
        if np.any(steps <= 0.0):
            bad = int(np.flatnonzero(steps <= 0.0)[0]) + 1
            raise DomainError(f"grid nodes must be strictly increasing (node {bad}, r={nodes[bad]:.6e})")
        if nodes[-1] != 1.0:
            raise DomainError(f"last grid node must be 1, got {nodes[-1]!r}")
        nodes.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)

    @classmethod
    def build(cls, r_min: float = DEFAULT_R_MIN, r_join: float = DEFAULT_R_JOIN,
              n_nodes: int = DEFAULT_NODES) -> "RadialGrid":
        """Geometric nodes on [r_min, r_join] followed by uniform nodes on [r_join, 1]"""
        if not 0.0 < r_min < r_join < 1.0:
            raise DomainError(f"need 0 < r_min < r_join < 1, got r_min={r_min}, r_join={r_join}")
        if n_nodes < MIN_NODES:
            raise DomainError(f"a radial grid needs at least {MIN_NODES} nodes, got {n_nodes}")
        n_geometric = n_nodes // 2
        inner = np.geomspace(r_min, r_join, n_geometric)
        outer = np.linspace(r_join, 1.0, n_nodes - n_geometric + 1)[1:]
        return cls(np.concatenate([inner, outer]))

    @classmethod
    def uniform(cls, r_min: float, n_nodes: int) -> "RadialGrid":
        """Equally spaced nodes on [r_min, 1]"""
        return cls(np.linspace(r_min, 1.0, n_nodes))

    @classmethod
    def from_nodes(cls, nodes) -> "RadialGrid":
        return cls(np.asarray(nodes, dtype=float))

    @property
    def r_min(self) -> float:
        return float(self.nodes[0])

    @property
    def size(self) -> int:
        return int(self.nodes.size)

    def __len__(self) -> int:
        return self.size


def _require_finite(samples, grid: RadialGrid, what: str = "sample") -> np.ndarray:
    values = np.asarray(samples, dtype=float)
    if values.shape != grid.nodes.shape:
        raise DomainError(f"{what} array has shape {values.shape}, grid has {grid.nodes.shape}")
    bad = np.flatnonzero(~np.isfinite(values))
    if bad.size:
        i = int(bad[0])
        raise DomainError(f"non-finite {what} at node {i} (r={grid.nodes[i]:.6e})")
    return values


# ===== QUADRATURE =====

def integrate(samples, grid: RadialGrid) -> float:
    """Composite trapezoid rule over [r_min, 1]; exact for piecewise-linear integrands"""
    values = _require_finite(samples, grid)
    return float(trapezoid(values, x=grid.nodes))


def integrate_smooth(samples, grid: RadialGrid) -> float:
    """Composite Simpson rule over [r_min, 1] for smooth integrands"""
    values = _require_finite(samples, grid)
    return float(simpson(values, x=grid.nodes))


def cumulative_integrate(samples, grid: RadialGrid, initial: float = 0.0,
                         log_variable: bool = False) -> np.ndarray:
    """
    Running integral from r_min to every node.

    With log_variable=True the integral is carried out in t = ln r, i.e. the
    integrand r * f is integrated against dt. Power-law integrands become
    smooth exponentials in t, which the Simpson rule handles far better on
    the geometric part of the grid.
    """
    values = _require_finite(samples, grid)
    if log_variable:
        running = cumulative_simpson(values * grid.nodes, x=np.log(grid.nodes), initial=0.0)
    else:
        running = cumulative_simpson(values, x=grid.nodes, initial=0.0)
    return running + initial


def integrate_window(samples, grid: RadialGrid, a: float, b: float) -> float:
    """Simpson integral over [a, b] with linearly interpolated end values"""
    values = _require_finite(samples, grid)
    r = grid.nodes
    a = max(float(a), r[0])
    b = min(float(b), r[-1])
    if b <= a:
        return 0.0
    inside = (r > a) & (r < b)
    x = np.concatenate([[a], r[inside], [b]])
    y = np.concatenate([[np.interp(a, r, values)], values[inside], [np.interp(b, r, values)]])
    if x.size < 3:
        return float(trapezoid(y, x=x))
    return float(simpson(y, x=x))


def derivative(samples, grid: RadialGrid) -> np.ndarray:
    """Second-order finite differences on the nonuniform grid"""
    values = _require_finite(samples, grid)
    return np.gradient(values, grid.nodes, edge_order=2)


# ===== TRIDIAGONAL PENCIL =====

@dataclass(frozen=True, eq=False)
class TridiagonalPair:
    """
    Symmetric tridiagonal stiffness A (diag, off) with a diagonal mass B.

    The pencil A v = lambda B v is what the discretized stability forms reduce
    to on piecewise-linear hats.
    """
    diag: np.ndarray
    off: np.ndarray
    mass: np.ndarray
    size: int = field(init=False)

    def __post_init__(self):
        diag = np.array(self.diag, dtype=float)
        off = np.array(self.off, dtype=float)
        mass = np.array(self.mass, dtype=float)
        m = diag.size
        if m == 0:
            raise DomainError("empty pencil")
        if off.size != max(m - 1, 0) or mass.size != m:
            raise DomainError(f"pencil sizes disagree: diag {m}, off {off.size}, mass {mass.size}")
        if not (np.all(np.isfinite(diag)) and np.all(np.isfinite(off)) and np.all(np.isfinite(mass))):
            raise DomainError("pencil entries must be finite")
        if np.any(mass <= 0.0):
            bad = int(np.flatnonzero(mass <= 0.0)[0])
            raise DomainError(f"mass entry {bad} is not positive ({mass[bad]!r})")
        object.__setattr__(self, "diag", diag)
        object.__setattr__(self, "off", off)
        object.__setattr__(self, "mass", mass)
        object.__setattr__(self, "size", m)

    def dense(self) -> Tuple[np.ndarray, np.ndarray]:
        """Dense (A, B) for brute-force comparisons"""
        A = np.diag(self.diag) + np.diag(self.off, 1) + np.diag(self.off, -1)
        return A, np.diag(self.mass)

    def scaled(self, factor: float) -> "TridiagonalPair":
        """Stiffness scaled by factor, mass unchanged"""
        return TridiagonalPair(self.diag * factor, self.off * factor, self.mass)

    def apply(self, v: np.ndarray) -> np.ndarray:
        out = self.diag * v
        out[:-1] += self.off * v[1:]
        out[1:] += self.off * v[:-1]
        return out

    def norm_a(self) -> float:
        row = np.abs(self.diag).copy()
        row[:-1] += np.abs(self.off)
        row[1:] += np.abs(self.off)
        return float(row.max())


def _pivot_floor(pair: TridiagonalPair) -> float:
    largest = float(np.max(pair.off ** 2)) if pair.off.size else 0.0
    return np.finfo(float).tiny * max(1.0, largest)


def sturm_count(pair: TridiagonalPair, x: float) -> int:
    """Number of pencil eigenvalues strictly below x (negative LDL^T pivots of A - xB)"""
    diag = pair.diag.tolist()
    mass = pair.mass.tolist()
    off_sq = (pair.off ** 2).tolist()
    floor = _pivot_floor(pair)
    count = 0
    pivot = 1.0
    for i in range(pair.size):
        d = diag[i] - x * mass[i]
        if i:
            d -= off_sq[i - 1] / pivot
        if abs(d) < floor:
            d = -floor
        if d < 0.0:
            count += 1
        pivot = d
    return count


def _gershgorin_bounds(pair: TridiagonalPair) -> Tuple[float, float]:
    centers = pair.diag / pair.mass
    radius = np.zeros(pair.size)
    if pair.size > 1:
        scaled = np.abs(pair.off) / np.sqrt(pair.mass[:-1] * pair.mass[1:])
        radius[:-1] += scaled
        radius[1:] += scaled
    lower = float(np.min(centers - radius))
    # Rayleigh quotient of a coordinate vector
    upper = float(np.min(centers))
    return lower, upper


def _inverse_iteration(pair: TridiagonalPair, shift: float, start: np.ndarray) -> np.ndarray:
    m = pair.size
    banded = np.zeros((3, m))
    banded[1] = pair.diag - shift * pair.mass
    banded[0, 1:] = pair.off
    banded[2, :-1] = pair.off
    y = solve_banded((1, 1), banded, pair.mass * start)
    return y / np.sqrt(np.dot(y, pair.mass * y))


def min_generalized_eig(pair: TridiagonalPair, tol: float = 1e-12) -> Tuple[float, np.ndarray]:
    """
    Smallest eigenvalue of A v = lambda B v and its B-normalized eigenvector.

    Parameters
    ----------
    pair : TridiagonalPair
        Symmetric tridiagonal A with positive diagonal B.
    tol : float
        Relative bisection width and relative residual bound.

    Returns
    -------
    (eigenvalue, eigenvector) with v^T B v = 1 and the largest entry of v positive.
    """
    if not tol > 0.0:
        raise DomainError(f"tolerance must be positive, got {tol}")
    if pair.size == 1:
        return float(pair.diag[0] / pair.mass[0]), np.array([1.0 / np.sqrt(pair.mass[0])])

    lo, hi = _gershgorin_bounds(pair)
    floor = np.finfo(float).eps * max(abs(lo), abs(hi), np.finfo(float).tiny)
    iterations = 0
    while hi - lo > max(tol * max(abs(lo), abs(hi)), floor):
        if iterations >= BISECTION_CAP:
            raise ConvergenceError(
                f"bisection did not converge in {BISECTION_CAP} steps (bracket [{lo!r}, {hi!r}])",
                best=(0.5 * (lo + hi), None),
            )
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if sturm_count(pair, mid) >= 1:
            hi = mid
        else:
            lo = mid
        iterations += 1
    logger.debug("Sturm bisection: %d steps, bracket width %.3e", iterations, hi - lo)

    eigenvalue = 0.5 * (lo + hi)
    shift = lo - max(hi - lo, floor, tol * max(abs(lo), 1.0))
    scale = pair.norm_a() + abs(eigenvalue) * float(pair.mass.max())
    vector = np.ones(pair.size)
    residual = np.inf
    for _ in range(INVERSE_ITERATION_CAP):
        vector = _inverse_iteration(pair, shift, vector)
        quotient = float(np.dot(vector, pair.apply(vector)))
        if abs(quotient - eigenvalue) <= (hi - lo) + 16.0 * floor:
            eigenvalue = quotient
        residual = float(np.linalg.norm(pair.apply(vector) - eigenvalue * pair.mass * vector))
        if residual <= max(tol, 1e3 * np.finfo(float).eps) * scale * float(np.linalg.norm(vector)):
            break
    else:
        raise ConvergenceError(
            f"inverse iteration residual {residual:.3e} above tolerance", best=(eigenvalue, vector)
        )

    if vector[np.argmax(np.abs(vector))] < 0.0:
        vector = -vector
    return eigenvalue, vector


# ===== ROOT FINDING =====

def find_root_bracketed(f: Callable[[float], float], lo: float, hi: float,
                        tol: float = 1e-12, f_lo: Optional[float] = None,
                        f_hi: Optional[float] = None) -> float:
    """Brent root of f on [lo, hi]; the end values may be passed in if already known"""
    f_lo = f(lo) if f_lo is None else f_lo
    f_hi = f(hi) if f_hi is None else f_hi
    if f_lo == 0.0:
        return float(lo)
    if f_hi == 0.0:
        return float(hi)
    if np.sign(f_lo) == np.sign(f_hi):
        raise BracketError(f"no sign change on [{lo}, {hi}]: f(lo)={f_lo:.6e}, f(hi)={f_hi:.6e}")
    try:
        root = brentq(f, lo, hi, xtol=tol, maxiter=200)
    except RuntimeError as e:
        raise ConvergenceError(f"Brent iteration failed: {e}") from e
    return float(root)
