import numpy as np
import pytest

from errors import DomainError, ScaleError
from hessian_core import (ProblemParams, RadialEigenpair, binomial, binomial_identity_failures,
                          in_gamma_k, quad_wSv, radial_hessian, radial_lower_bound,
                          s2_trace_form, sigma_k, sk_divergence, sk_full, sk_radial,
                          skij_matrix, tangential_coefficient)
from numerics import RadialGrid


def _radial_case(rng, n, lambda1=None, lambda2=None):
    x = rng.normal(size=n)
    x *= rng.uniform(0.2, 1.0) / np.linalg.norm(x)
    l1 = rng.uniform(-2.0, 2.0) if lambda1 is None else lambda1
    l2 = rng.uniform(0.1, 2.0) if lambda2 is None else lambda2
    pair = RadialEigenpair(float(l1), float(l2), float(np.linalg.norm(x)))
    return x, pair, radial_hessian(x, pair)


def test_binomial_table():
    assert binomial(10, 3) == 120
    assert binomial(64, 32) == 1832624140942590534
    assert binomial(5, 7) == 0
    assert binomial(5, -1) == 0


@pytest.mark.parametrize("n, k, c", [(3, 1, 1.0), (4, 2, 1.5), (6, 3, 20.0 / 6.0), (10, 10, 0.1)])
def test_problem_params_constant(n, k, c):
    assert ProblemParams(n, k).c_nk == pytest.approx(c, rel=1e-15)


@pytest.mark.parametrize("n, k", [(1, 1), (3, 0), (3, 4), (65, 2)])
def test_problem_params_rejects(n, k):
    with pytest.raises(DomainError):
        ProblemParams(n, k)


def test_critical_dimension():
    assert ProblemParams(12, 2).critical_dimension == 12


def test_sigma_k_small_example():
    assert sigma_k([1.0, 2.0, 3.0], 1) == 6.0
    assert sigma_k([1.0, 2.0, 3.0], 2) == 11.0
    assert sigma_k([1.0, 2.0, 3.0], 3) == 6.0
    with pytest.raises(DomainError):
        sigma_k([1.0, 2.0], 3)


def test_gamma_cone_membership():
    assert in_gamma_k([1.0, 1.0, 1.0], 3)
    assert in_gamma_k([3.0, -1.0], 1)
    assert not in_gamma_k([3.0, -1.0], 2)


def test_sk_full_diagonal_and_guards():
    assert sk_full(np.diag([1.0, 2.0, 3.0]), 2) == pytest.approx(11.0)
    with pytest.raises(DomainError, match="symmetric"):
        sk_full(np.array([[1.0, 2.0], [0.0, 1.0]]), 1)
    with pytest.raises(ScaleError):
        sk_full(np.eye(13), 2)


def test_s2_trace_form_matches_minors(rng):
    for n in range(2, 8):
        A = rng.normal(size=(n, n))
        H = A + A.T
        assert s2_trace_form(H) == pytest.approx(sk_full(H, 2), rel=1e-10, abs=1e-10)


@pytest.mark.parametrize("n", [2, 3, 5, 7])
def test_radial_formula_against_minor_sum(rng, n):
    for k in range(1, n + 1):
        params = ProblemParams(n, k)
        for _ in range(10):
            x, pair, H = _radial_case(rng, n)
            radial = sk_radial(pair.r, pair.lambda2 * pair.r, pair.lambda1, params)
            assert radial == pytest.approx(sk_full(H, k), rel=1e-10, abs=1e-10)


def test_sk_radial_constant_solution():
    params = ProblemParams(5, 2)
    a = (1.0 / (5 * params.c_nk)) ** 0.5
    r = np.linspace(0.1, 1.0, 7)
    np.testing.assert_allclose(sk_radial(r, a * r, np.full(7, a), params), 1.0, rtol=1e-13)


def test_sk_radial_rejects_origin():
    with pytest.raises(DomainError):
        sk_radial(np.array([0.0, 0.5]), np.ones(2), np.ones(2), ProblemParams(3, 1))


def test_divergence_form_matches_radial():
    grid = RadialGrid.uniform(0.2, 8001)
    params = ProblemParams(4, 2)
    r = grid.nodes
    du, d2u = 3.0 * r * r, 6.0 * r
    expected = sk_radial(r, du, d2u, params)
    np.testing.assert_allclose(sk_divergence(grid, du, params)[1:-1], expected[1:-1], rtol=1e-5)


def test_skij_equal_eigenvalues_is_scalar(rng):
    params = ProblemParams(6, 3)
    x, pair, _ = _radial_case(rng, 6, lambda1=0.7, lambda2=0.7)
    matrix, degenerate = skij_matrix(x, pair, params)
    assert not degenerate
    np.testing.assert_allclose(matrix, 3 * params.c_nk * 0.7 ** 2 * np.eye(6), rtol=1e-13)


def test_skij_order_one_is_identity(rng):
    x, pair, _ = _radial_case(rng, 4)
    matrix, degenerate = skij_matrix(x, pair, ProblemParams(4, 1))
    np.testing.assert_array_equal(matrix, np.eye(4))
    assert not degenerate


def test_skij_degenerate_tangential(rng):
    x, pair, _ = _radial_case(rng, 5, lambda1=1.0, lambda2=0.0)
    matrix, degenerate = skij_matrix(x, pair, ProblemParams(5, 3))
    assert degenerate
    assert not matrix.any()
    _, degenerate_k2 = skij_matrix(x, pair, ProblemParams(5, 2))
    assert degenerate_k2


@pytest.mark.parametrize("n, k", [(3, 1), (3, 2), (4, 3), (6, 2), (7, 5)])
def test_euler_identity(rng, n, k):
    params = ProblemParams(n, k)
    for _ in range(10):
        x, pair, H = _radial_case(rng, n)
        matrix, _ = skij_matrix(x, pair, params)
        target = k * sk_radial(pair.r, pair.lambda2 * pair.r, pair.lambda1, params)
        assert np.trace(matrix @ H) == pytest.approx(target, rel=1e-10, abs=1e-10)


def test_quadratic_form_split(rng):
    for n, k in ((3, 2), (5, 3), (8, 4)):
        params = ProblemParams(n, k)
        x, pair, _ = _radial_case(rng, n)
        w, v = rng.normal(size=n), rng.normal(size=n)
        matrix, _ = skij_matrix(x, pair, params)
        assert quad_wSv(w, v, x, pair, params) == pytest.approx(float(w @ matrix @ v), rel=1e-12, abs=1e-12)


def test_radial_lower_bound_inside_cone(rng):
    for n, k in ((4, 2), (6, 3), (8, 5)):
        params = ProblemParams(n, k)
        for _ in range(50):
            x, pair, _ = _radial_case(rng, n)
            if n * pair.lambda2 + k * (pair.lambda1 - pair.lambda2) <= 0.0:
                continue
            grad = rng.normal(size=n)
            assert tangential_coefficient(pair, params) > 0.0
            assert quad_wSv(grad, grad, x, pair, params) >= radial_lower_bound(grad, x, pair, params) - 1e-12


def test_point_radius_must_match_pair():
    pair = RadialEigenpair(1.0, 1.0, 0.5)
    with pytest.raises(DomainError):
        radial_hessian(np.array([1.0, 0.0]), pair)


def test_binomial_identities_hold():
    assert binomial_identity_failures(20) == []


def test_eigenpair_from_derivatives():
    pair = RadialEigenpair.from_derivatives(0.5, 0.25, -1.0)
    assert pair.lambda1 == -1.0
    assert pair.lambda2 == 0.5
    np.testing.assert_array_equal(pair.spectrum(4), [-1.0, 0.5, 0.5, 0.5])
    assert in_gamma_k(pair.spectrum(4), 1)
    assert not in_gamma_k(pair.spectrum(4), 2)
    with pytest.raises(DomainError, match="radius"):
        RadialEigenpair.from_derivatives(0.0, 1.0, 1.0)
