import numpy as np
import pytest
from scipy.linalg import eigh

from bumps import Bump, SineTest, default_bump_suite
from errors import DomainError
from hessian_core import ProblemParams
from numerics import RadialGrid, TridiagonalPair
from radial_solver import Nonlinearity, RadialProfile, constant_solution
from stability import (CutoffFamily, WeightSamples, assemble_pencil, choose_sigma,
                       cutoff_eval, cutoff_remainder, hardy_check, min_rayleigh, pencil_verdict, q_gfree,
                       q_radial, q_radial_magnitude, q_ueta_identity_gap, ueta_test)


def _flat_gprime(value):
    return lambda u: np.full_like(u, value)


@pytest.mark.parametrize("n, k", [(3, 1), (4, 2), (7, 3)])
def test_ueta_identity_for_constant_solution(default_grid, n, k):
    params = ProblemParams(n, k)
    profile = constant_solution(1.0, params, default_grid)
    g = Nonlinearity.constant(1.0)
    for eta in (Bump(0.3, 0.2), Bump(0.05, 0.04), Bump(0.7, 0.25)):
        gap = q_ueta_identity_gap(profile, g, eta, params)
        scale = q_radial_magnitude(profile, g, ueta_test(profile, eta), params)
        assert gap <= 1e-5 * scale


def test_gfree_form_is_positive_for_k1_constant(small_grid):
    params = ProblemParams(3, 1)
    profile = constant_solution(1.0, params, small_grid)
    # with g' = 0 the radial form is a pure Dirichlet energy
    test = ueta_test(profile, Bump(0.5, 0.3))
    assert q_radial(profile, Nonlinearity.constant(1.0), test, params) > 0.0
    assert q_gfree(profile, Bump(0.5, 0.3), params) > 0.0


def test_ueta_needs_second_derivative(small_grid):
    profile = RadialProfile(small_grid, np.zeros(small_grid.size), np.ones(small_grid.size))
    with pytest.raises(DomainError, match="u''"):
        ueta_test(profile, Bump(0.5, 0.1))


def test_constant_nonlinearity_is_semistable(small_grid):
    params = ProblemParams(3, 1)
    report = min_rayleigh(constant_solution(1.0, params, small_grid), Nonlinearity.constant(1.0), params)
    assert report.verdict == "semistable"
    assert report.min_eig > 0.0
    assert report.witness_energy > 0.0
    assert set(report.to_dict()) == {"min_eig", "verdict", "threshold", "witness_energy"}


def test_strongly_negative_potential_is_unstable(small_grid):
    params = ProblemParams(3, 1)
    profile = constant_solution(1.0, params, small_grid)
    report = min_rayleigh(profile, _flat_gprime(-1000.0), params)
    assert report.verdict == "unstable"
    assert report.min_eig < -report.threshold
    assert report.witness.shape == profile.r.shape
    assert report.witness[0] == 0.0 and report.witness[-1] == 0.0


def test_degenerate_nodes_are_left_out(small_grid):
    r = small_grid.nodes
    du = np.where(np.arange(r.size) < 10, 0.0, r)
    profile = RadialProfile(small_grid, np.zeros(r.size), du)
    assembly = assemble_pencil(profile, _flat_gprime(0.0), ProblemParams(4, 2))
    assert assembly.dofs.min() >= 10
    assert assembly.pair.size == assembly.dofs.size


def test_all_degenerate_is_inconclusive(small_grid):
    profile = RadialProfile(small_grid, np.zeros(small_grid.size), np.zeros(small_grid.size))
    report = min_rayleigh(profile, _flat_gprime(0.0), ProblemParams(4, 2))
    assert report.verdict == "inconclusive"
    assert np.isnan(report.min_eig)
    assert report.to_dict()["min_eig"] is None


def test_min_rayleigh_rejects_decreasing_profile(small_grid):
    profile = RadialProfile(small_grid, np.zeros(small_grid.size), -np.ones(small_grid.size))
    with pytest.raises(DomainError):
        min_rayleigh(profile, _flat_gprime(0.0), ProblemParams(3, 1))


def test_logarithmic_cutoff_values():
    fam = CutoffFamily(1e-2, 2, 4)
    assert fam.logarithmic
    value, _ = cutoff_eval(fam, np.array([1e-5, 1e-4, 1e-3, 1e-2, 0.5]))
    np.testing.assert_allclose(value, [0.0, 0.0, 0.5, 1.0, 1.0], atol=1e-12)


def test_linear_cutoff_values():
    fam = CutoffFamily(1e-2, 1, 5)
    assert not fam.logarithmic
    value, _ = cutoff_eval(fam, np.array([5e-3, 1e-2, 1.5e-2, 2e-2, 0.3]))
    np.testing.assert_allclose(value, [0.0, 0.0, 0.5, 1.0, 1.0], atol=1e-12)


@pytest.mark.parametrize("fam, r", [(CutoffFamily(1e-2, 2, 4), 3e-3), (CutoffFamily(1e-2, 1, 5), 1.3e-2)])
def test_cutoff_slope_matches_difference(fam, r):
    step = 1e-9
    _, slope = cutoff_eval(fam, np.array([r]))
    plus, _ = cutoff_eval(fam, np.array([r + step]))
    minus, _ = cutoff_eval(fam, np.array([r - step]))
    assert slope[0] == pytest.approx((plus[0] - minus[0]) / (2 * step), rel=1e-5)


def test_cutoff_dimension_guard():
    with pytest.raises(DomainError):
        CutoffFamily(1e-2, 3, 5)


def test_choose_sigma():
    assert choose_sigma(5, 2) == 2
    assert choose_sigma(3, 2) == 1
    assert choose_sigma(12, 3, classical=True) == 1


def test_cutoff_remainder_shrinks(small_grid):
    params = ProblemParams(5, 1)
    profile = constant_solution(1.0, params, small_grid)
    coarse = cutoff_remainder(profile, SineTest(1), CutoffFamily(1e-1, 1, 5), params)
    fine = cutoff_remainder(profile, SineTest(1), CutoffFamily(1e-3, 1, 5), params)
    assert abs(fine) < 1e-6 * abs(coarse)


def test_classical_hardy_weight(small_grid):
    n = 5
    weight = WeightSamples(small_grid, np.ones(small_grid.size), np.zeros(small_grid.size))
    for eta in default_bump_suite():
        result = hardy_check(weight, float(n - 2), 0.0, ProblemParams(n, 1), eta)
        assert result.conditions_ok
        assert result.lhs > 0.0
        assert result.passed


def test_hardy_condition_violation(small_grid):
    weight = WeightSamples(small_grid, np.ones(small_grid.size), np.zeros(small_grid.size))
    result = hardy_check(weight, 4.0, 0.0, ProblemParams(5, 1), Bump(0.3, 0.1))
    assert not result.growth_ok
    assert not result.passed


def test_hardy_rejects_negative_weight(small_grid):
    values = np.ones(small_grid.size)
    values[4] = -1.0
    weight = WeightSamples(small_grid, values, np.zeros(small_grid.size))
    with pytest.raises(DomainError, match="node 4"):
        hardy_check(weight, 3.0, 0.0, ProblemParams(5, 1), Bump(0.3, 0.1))


def test_hardy_limit_fails_for_nonvanishing_weight(small_grid):
    n = 5
    r = small_grid.nodes
    weight = WeightSamples(small_grid, r ** (2.0 - n), (2.0 - n) * r ** (1.0 - n))
    result = hardy_check(weight, 1.0, 0.0, ProblemParams(n, 1), Bump(0.3, 0.1))
    assert not result.limit_ok
    assert not result.conditions_ok
    assert not result.passed


def test_hardy_limit_needs_three_decades():
    short = RadialGrid.build(0.05, 0.1, 256)
    n = 5
    weight = WeightSamples(short, np.ones(short.size), np.zeros(short.size))
    result = hardy_check(weight, float(n - 2), 0.0, ProblemParams(n, 1), Bump(0.3, 0.1))
    assert result.growth_ok
    assert not result.limit_ok
    assert not result.passed


@pytest.mark.parametrize("fam", [CutoffFamily(1e-2, 2, 4), CutoffFamily(1e-2, 1, 5), CutoffFamily(0.2, 3, 6)])
def test_cutoff_is_monotone_in_unit_interval(fam):
    r = np.geomspace(1e-6, 1.0, 4000)
    value, slope = cutoff_eval(fam, r)
    assert value.min() >= -1e-15 and value.max() <= 1.0 + 1e-15
    assert np.all(np.diff(value) >= -1e-15)
    assert np.all(slope >= -1e-12)


@pytest.mark.parametrize("gprime, verdict", [(0.0, "semistable"), (-1000.0, "unstable")])
def test_verdict_survives_rescaling(small_grid, gprime, verdict):
    params = ProblemParams(3, 1)
    profile = constant_solution(1.0, params, small_grid)
    assembly = assemble_pencil(profile, _flat_gprime(gprime), params)
    tau = 1e-8 * assembly.stiffness_scale
    base, _, base_verdict = pencil_verdict(assembly.pair, tau)
    assert base_verdict == verdict
    for factor in (1e-3, 7.5, 1e4):
        scaled, _, scaled_verdict = pencil_verdict(assembly.pair.scaled(factor), factor * tau)
        assert scaled_verdict == verdict
        assert scaled == pytest.approx(factor * base, rel=1e-8)


def test_unstable_string_matches_dense_eigensolver():
    grid = RadialGrid.uniform(0.05, 66)
    r = grid.nodes
    profile = RadialProfile(grid, (r * r - 1.0) / 2.0, r)
    params = ProblemParams(3, 1)
    gprime = _flat_gprime(-1000.0)
    assembly = assemble_pencil(profile, gprime, params)
    assert assembly.pair.size == 64
    A, B = assembly.pair.dense()
    expected = float(eigh(A, B, eigvals_only=True)[0])
    report = min_rayleigh(profile, gprime, params)
    assert report.min_eig == pytest.approx(expected, rel=1e-9)
    assert report.verdict == "unstable"
    assert report.witness_energy < 0.0


def test_scaled_pair_keeps_mass():
    pair = TridiagonalPair([2.0, 3.0, 4.0], [-1.0, -0.5], [1.0, 0.5, 2.0])
    A, B = pair.dense()
    scaled_A, scaled_B = pair.scaled(-2.5).dense()
    np.testing.assert_array_equal(scaled_A, -2.5 * A)
    np.testing.assert_array_equal(scaled_B, B)
