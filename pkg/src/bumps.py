"""
Radial test functions for weak forms and stability checks.

Each test function exposes value(r) and derivative(r), vectorized over radii.
"""

from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from errors import DomainError


@dataclass(frozen=True)
class Bump:
    """C-infinity bump exp(1 - 1/(1 - t^2)), t = (r - center)/width, peak value 1"""
    center: float
    width: float

    def __post_init__(self):
        if not self.width > 0.0:
            raise DomainError(f"bump width must be positive, got {self.width}")

    @property
    def support(self) -> Tuple[float, float]:
        return self.center - self.width, self.center + self.width

    def _parts(self, r):
        t = (np.asarray(r, dtype=float) - self.center) / self.width
        inside = np.abs(t) < 1.0
        gap = np.where(inside, 1.0 - t * t, 1.0)
        phi = np.where(inside, np.exp(1.0 - 1.0 / gap), 0.0)
        return t, gap, phi

    def value(self, r):
        return self._parts(r)[2]

    def derivative(self, r):
        t, gap, phi = self._parts(r)
        return phi * (-2.0 * t / gap ** 2) / self.width


@dataclass(frozen=True)
class SineTest:
    """sin(m pi r); vanishes at r = 1"""
    mode: int = 1

    @property
    def support(self) -> Tuple[float, float]:
        return 0.0, 1.0

    def value(self, r):
        return np.sin(self.mode * np.pi * np.asarray(r, dtype=float))

    def derivative(self, r):
        return self.mode * np.pi * np.cos(self.mode * np.pi * np.asarray(r, dtype=float))


@dataclass(frozen=True, eq=False)
class SampledFunction:
    """Test function known only on a grid: values plus derivative samples"""
    nodes: np.ndarray
    values: np.ndarray
    slopes: np.ndarray

    def value(self, r):
        r = np.asarray(r, dtype=float)
        if r.shape == self.nodes.shape and np.array_equal(r, self.nodes):
            return self.values
        return np.interp(r, self.nodes, self.values, left=0.0, right=0.0)

    def derivative(self, r):
        r = np.asarray(r, dtype=float)
        if r.shape == self.nodes.shape and np.array_equal(r, self.nodes):
            return self.slopes
        return np.interp(r, self.nodes, self.slopes, left=0.0, right=0.0)

    @property
    def support(self) -> Tuple[float, float]:
        nonzero = np.flatnonzero(self.values != 0.0)
        if nonzero.size == 0:
            return float(self.nodes[0]), float(self.nodes[0])
        return float(self.nodes[nonzero[0]]), float(self.nodes[nonzero[-1]])


def sample(test, r) -> Tuple[np.ndarray, np.ndarray]:
    """(values, derivatives) of a test function on the radii r"""
    return np.asarray(test.value(r), dtype=float), np.asarray(test.derivative(r), dtype=float)


def default_bump_suite(count: int = 20, lo: float = 1e-4, hi: float = 0.6) -> List[Bump]:
    """Bumps with log-spaced centers and half-width equal to half the center"""
    return [Bump(float(c), 0.5 * float(c)) for c in np.geomspace(lo, hi, count)]


def random_bump_suite(rng: np.random.Generator, count: int = 50,
                      lo: float = 1e-4, hi: float = 0.6) -> List[Bump]:
    """Seeded bumps with log-uniform centers; supports stay inside (0, 1)"""
    centers = np.exp(rng.uniform(np.log(lo), np.log(hi), count))
    fractions = rng.uniform(0.2, 0.8, count)
    suite = []
    for c, f in zip(centers, fractions):
        width = min(f * c, 0.95 * (1.0 - c))
        suite.append(Bump(float(c), float(width)))
    return suite


def weak_test_suite() -> list:
    """Fixed eight-function suite used to compare weak and integral residuals"""
    bumps = [Bump(0.05, 0.04), Bump(0.2, 0.1), Bump(0.4, 0.2), Bump(0.6, 0.3), Bump(0.75, 0.2)]
    return [SineTest(1), SineTest(2), SineTest(3)] + bumps
