"""
k-Hessian operator kernels.

Elementary symmetric functions, the Gamma_k cone, the principal-minor oracle
for S_k, the radial formula, and the closed forms of the cofactor matrix
S_k^{ij} for radial Hessians.
"""

import itertools
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import List, Tuple

import numpy as np

from errors import DomainError, ScaleError

logger = logging.getLogger(__name__)

PASCAL_LIMIT = 64
ORACLE_LIMIT = 12


def _pascal_rows(limit: int) -> List[List[int]]:
    rows = [[1]]
    for n in range(1, limit + 1):
        prev = rows[-1]
        rows.append([1] + [prev[j - 1] + prev[j] for j in range(1, n)] + [1])
    return rows


_PASCAL = _pascal_rows(PASCAL_LIMIT)


def binomial(n: int, k: int) -> int:
    """Exact C(n, k) from the Pascal table; zero outside 0 <= k <= n"""
    if n < 0 or n > PASCAL_LIMIT:
        raise DomainError(f"binomial table covers 0 <= n <= {PASCAL_LIMIT}, got n={n}")
    if k < 0 or k > n:
        return 0
    return _PASCAL[n][k]


@dataclass(frozen=True)
class ProblemParams:
    """Dimension n, Hessian order k and c_{n,k} = C(n,k)/n"""
    n: int
    k: int
    c_nk: float = field(init=False)

    def __post_init__(self):
        if int(self.n) != self.n or int(self.k) != self.k:
            raise DomainError(f"n and k must be integers, got n={self.n}, k={self.k}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "k", int(self.k))
        if self.n < 2:
            raise DomainError(f"dimension n must be at least 2, got {self.n}")
        if not 1 <= self.k <= self.n:
            raise DomainError(f"Hessian order must satisfy 1 <= k <= n, got k={self.k}, n={self.n}")
        if self.n > PASCAL_LIMIT:
            raise DomainError(f"dimension above {PASCAL_LIMIT} is not supported")
        object.__setattr__(self, "c_nk", float(Fraction(binomial(self.n, self.k), self.n)))

    @property
    def critical_dimension(self) -> int:
        """n = 2k + 8, where the decay exponent vanishes"""
        return 2 * self.k + 8


@dataclass(frozen=True)
class RadialEigenpair:
    """Eigenvalues of a radial Hessian: lambda1 = u'' (radial), lambda2 = u'/r (tangential)"""
    lambda1: float
    lambda2: float
    r: float

    def __post_init__(self):
        if not self.r > 0.0:
            raise DomainError(f"radius must be positive, got {self.r}")

    @classmethod
    def from_derivatives(cls, r: float, uprime: float, usecond: float) -> "RadialEigenpair":
        if not r > 0.0:
            raise DomainError(f"radius must be positive, got {r}")
        return cls(float(usecond), float(uprime) / r, float(r))

    def spectrum(self, n: int) -> np.ndarray:
        return np.array([self.lambda1] + [self.lambda2] * (n - 1))


# ===== SYMMETRIC FUNCTIONS =====

def _esp_all(lam: np.ndarray, k: int) -> np.ndarray:
    """e_0..e_k of the entries of lam"""
    e = np.zeros(k + 1)
    e[0] = 1.0
    for x in lam:
        e[1:] = e[1:] + x * e[:-1]
    return e


def sigma_k(lam, k: int) -> float:
    """k-th elementary symmetric function of the entries of lam"""
    lam = np.asarray(lam, dtype=float).ravel()
    if not 1 <= k <= lam.size:
        raise DomainError(f"sigma_k needs 1 <= k <= {lam.size}, got k={k}")
    return float(_esp_all(lam, k)[k])


def in_gamma_k(lam, k: int) -> bool:
    """True iff sigma_1..sigma_k of lam are all positive"""
    lam = np.asarray(lam, dtype=float).ravel()
    if not 1 <= k <= lam.size:
        raise DomainError(f"Gamma_k needs 1 <= k <= {lam.size}, got k={k}")
    return bool(np.all(_esp_all(lam, k)[1:] > 0.0))


# ===== MINOR-SUM ORACLE =====

def principal_minor_sum(H: np.ndarray, k: int) -> float:
    """Sum of k x k principal minors without shape or symmetry checks"""
    n = H.shape[0]
    total = 0.0
    for alpha in itertools.combinations(range(n), k):
        idx = np.array(alpha)
        total += np.linalg.det(H[np.ix_(idx, idx)])
    return float(total)


def sk_full(H, k: int) -> float:
    """Sum of the k x k principal minors of a symmetric matrix (brute force)"""
    H = np.asarray(H, dtype=float)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise DomainError(f"expected a square matrix, got shape {H.shape}")
    n = H.shape[0]
    if n > ORACLE_LIMIT:
        raise ScaleError(f"minor-sum oracle is limited to n <= {ORACLE_LIMIT}, got n={n}")
    if not 1 <= k <= n:
        raise DomainError(f"S_k needs 1 <= k <= {n}, got k={k}")
    if not np.allclose(H, H.T, rtol=1e-12, atol=1e-12 * max(1.0, float(np.abs(H).max()))):
        raise DomainError("matrix is not symmetric")
    return principal_minor_sum(H, k)


def s2_trace_form(H) -> float:
    """S_2 through 1/2 ((tr H)^2 - |H|^2)"""
    H = np.asarray(H, dtype=float)
    return 0.5 * (np.trace(H) ** 2 - float(np.sum(H * H)))


# ===== RADIAL FORMULAS =====

def sk_radial(r, uprime, usecond, params: ProblemParams):
    """c_{n,k} (u'/r)^{k-1} (n u'/r + k (u'' - u'/r)); vectorized over nodes"""
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0.0):
        raise DomainError("sk_radial needs r > 0")
    lam2 = np.asarray(uprime, dtype=float) / r
    lam1 = np.asarray(usecond, dtype=float)
    n, k = params.n, params.k
    value = params.c_nk * lam2 ** (k - 1) * (n * lam2 + k * (lam1 - lam2))
    return float(value) if np.ndim(value) == 0 else value


def sk_divergence(grid, uprime, params: ProblemParams) -> np.ndarray:
    """c_{n,k} r^{1-n} (r^{n-k} (u')^k)' by finite differences"""
    r = grid.nodes
    flux = r ** (params.n - params.k) * np.asarray(uprime, dtype=float) ** params.k
    return params.c_nk * r ** (1 - params.n) * np.gradient(flux, r, edge_order=2)


def _unit(x, pair: RadialEigenpair) -> np.ndarray:
    x = np.asarray(x, dtype=float).ravel()
    norm = float(np.linalg.norm(x))
    if norm == 0.0:
        raise DomainError("the point x must be nonzero")
    if abs(norm - pair.r) > 1e-10 * max(1.0, pair.r):
        raise DomainError(f"|x| = {norm!r} does not match the eigenpair radius {pair.r!r}")
    return x / norm


def radial_hessian(x, pair: RadialEigenpair) -> np.ndarray:
    """lambda2 I + (lambda1 - lambda2) x x^T / |x|^2"""
    e = _unit(x, pair)
    return pair.lambda2 * np.eye(e.size) + (pair.lambda1 - pair.lambda2) * np.outer(e, e)


def tangential_coefficient(pair: RadialEigenpair, params: ProblemParams) -> float:
    """lambda2 + ((k-1)/(n-1)) (lambda1 - lambda2)"""
    return pair.lambda2 + (params.k - 1) / (params.n - 1) * (pair.lambda1 - pair.lambda2)


def skij_matrix(x, pair: RadialEigenpair, params: ProblemParams) -> Tuple[np.ndarray, bool]:
    """
    Cofactor matrix S_k^{ij} of a radial Hessian and a degeneracy flag.

    The flag is set when lambda2 = 0 and k >= 2. For k >= 3 the matrix is
    then zero; for k = 2 the finite two-term formula is still returned.
    """
    e = _unit(x, pair)
    n, k = params.n, params.k
    identity = np.eye(n)
    if k == 1:
        return identity, False
    degenerate = pair.lambda2 == 0.0
    if degenerate and k >= 3:
        return np.zeros((n, n)), True
    tangential = identity - np.outer(e, e)
    matrix = k * params.c_nk * pair.lambda2 ** (k - 2) * (
        pair.lambda2 * identity + (k - 1) / (n - 1) * (pair.lambda1 - pair.lambda2) * tangential
    )
    return matrix, degenerate


def quad_wSv(w, v, x, pair: RadialEigenpair, params: ProblemParams) -> float:
    """w S v^T from the split into the radial direction and its orthogonal complement"""
    e = _unit(x, pair)
    w = np.asarray(w, dtype=float).ravel()
    v = np.asarray(v, dtype=float).ravel()
    n, k = params.n, params.k
    if k == 1:
        return float(np.dot(w, v))
    if pair.lambda2 == 0.0 and k >= 3:
        return 0.0
    wv = float(np.dot(w, v))
    we, ve = float(np.dot(w, e)), float(np.dot(v, e))
    radial_part = pair.lambda2 * wv
    tangential_part = (k - 1) / (n - 1) * (pair.lambda1 - pair.lambda2) * (wv - we * ve)
    return k * params.c_nk * pair.lambda2 ** (k - 2) * (radial_part + tangential_part)


def radial_lower_bound(grad, x, pair: RadialEigenpair, params: ProblemParams) -> float:
    """k c_{n,k} lambda2^{k-1} (x/|x|, grad)^2, a lower bound of grad S grad^T inside the cone"""
    e = _unit(x, pair)
    along = float(np.dot(np.asarray(grad, dtype=float).ravel(), e))
    return params.k * params.c_nk * pair.lambda2 ** (params.k - 1) * along ** 2


# ===== COUNTING IDENTITIES =====

def binomial_identity_failures(n_max: int = 20) -> List[Tuple[int, int]]:
    """(n, k) pairs where the minor-counting identities of the radial reduction fail"""
    failures = []
    for n in range(2, n_max + 1):
        for k in range(1, n + 1):
            c_n = binomial(n, k)
            ok = (binomial(n - 2, k - 2) + binomial(n - 2, k - 1) == binomial(n - 1, k - 1)
                  and n * binomial(n - 1, k - 1) == k * c_n
                  and n * binomial(n - 1, k) == (n - k) * c_n)
            if not ok:
                failures.append((n, k))
    return failures
