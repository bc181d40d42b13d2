import math

import numpy as np
import pytest

from bumps import Bump, default_bump_suite
from errors import DomainError
from family import (FamilySpec, HFunction, build_family, classify_regime, decay_baseline,
                    delta_factored, delta_nk, estimate_exponents, family_sk,
                    family_sk_derivative, fit_decay, hardy_parameters, measure_decay,
                    observed_constants, reconstruct_g, skfactor_pair, verbatim_exponents)
from hessian_core import ProblemParams, sk_radial
from radial_solver import weighted_sobolev_norm
from stability import hardy_check, min_rayleigh, q_radial_magnitude, q_ueta_identity_gap, ueta_test


def test_delta_reference_value():
    assert delta_nk(11, 1) == pytest.approx(-0.3377224, abs=1e-7)


@pytest.mark.parametrize("k", [1, 2, 3, 4, 5])
def test_delta_sign_by_regime(k):
    assert delta_nk(2 * k + 8, k) == 0.0
    assert delta_nk(2 * k + 9, k) < 0.0
    assert delta_nk(2 * k + 7, k) > 0.0


def test_delta_forms_agree():
    for k in range(1, 8):
        for n in range(max(k, 2), 50):
            assert delta_factored(n, k) == pytest.approx(delta_nk(n, k), rel=1e-12, abs=1e-12)


def test_displayed_exponents_are_shifted_delta():
    for n, k in ((11, 1), (13, 2), (30, 4)):
        delta = delta_nk(n, k)
        np.testing.assert_allclose(verbatim_exponents(n, k), [delta - 1, delta - 2, delta - 3], rtol=1e-12)


def test_regimes():
    assert classify_regime(9, 1) == "bounded"
    assert classify_regime(10, 1) == "log"
    assert classify_regime(11, 1) == "power"
    exponents = estimate_exponents(ProblemParams(11, 1))
    assert exponents.regime == "power"
    assert exponents.du_rate == pytest.approx(exponents.delta - 1.0)
    assert set(exponents.to_dict()) == {"delta", "u_rate", "du_rate", "d2u_rate", "d3u_rate", "regime"}


def test_hardy_parameters_identity():
    for n, k in ((10, 1), (13, 2), (40, 6)):
        alpha, beta = hardy_parameters(ProblemParams(n, k))
        assert alpha ** 2 / 4 - beta ** 2 == pytest.approx((2 * n - k - 1) / (k + 1), rel=1e-13)
        assert beta == pytest.approx((k - 1) / (k + 1))


def test_skfactor_pair_meets_only_at_critical_dimension():
    left, right = skfactor_pair(12, 2)
    assert left == pytest.approx(8.0) and right == pytest.approx(8.0)
    left, right = skfactor_pair(15, 2)
    assert left != pytest.approx(right)
    assert left > 0.0


def test_family_needs_large_dimension(small_grid):
    with pytest.raises(DomainError, match="2k\\+8"):
        FamilySpec(ProblemParams(9, 1), HFunction("zero"), small_grid)


@pytest.mark.parametrize("kwargs", [{"kind": "const", "a": -1.0}, {"kind": "pow", "a": 1.0, "b": -1.5},
                                    {"kind": "cubic"}])
def test_h_validation(kwargs):
    with pytest.raises(DomainError):
        HFunction(**kwargs)


def test_h_table_integral():
    h = HFunction("table", table_r=np.array([0.1, 0.5, 1.0]), table_h=np.array([2.0, 2.0, 2.0]))
    np.testing.assert_allclose(h.integral(np.array([0.05, 0.3, 1.0])), [0.1, 0.6, 2.0])


@pytest.mark.parametrize("n, k, h", [
    (11, 1, HFunction("zero")),
    (13, 2, HFunction("const", a=1.0)),
    (16, 3, HFunction("pow", a=2.0, b=0.5)),
])
def test_family_profile_solves_equation(small_grid, n, k, h):
    spec = FamilySpec(ProblemParams(n, k), h, small_grid)
    weight, profile = build_family(spec)
    assert profile.boundary_value == 0.0
    assert np.all(np.diff(profile.u) > 0.0)
    radial = sk_radial(profile.r, profile.du, profile.d2u, spec.params)
    np.testing.assert_allclose(radial, family_sk(spec, profile.r), rtol=1e-10)
    g = reconstruct_g(spec, profile)
    np.testing.assert_allclose(g.g(profile.u), family_sk(spec, profile.r), rtol=1e-12)
    assert np.all(weight.values > 0.0)


def test_reconstructed_slope(small_grid):
    spec = FamilySpec(ProblemParams(13, 2), HFunction("const", a=1.0), small_grid)
    r = np.geomspace(1e-4, 0.95, 60)
    step = 1e-6 * r
    numeric = (family_sk(spec, r + step) - family_sk(spec, r - step)) / (2.0 * step)
    np.testing.assert_allclose(family_sk_derivative(spec, r), numeric, rtol=1e-7)
    g = reconstruct_g(spec)
    assert g.label == "family:n=13:k=2:h=const:1"


def test_power_regime_decay(small_grid):
    spec = FamilySpec(ProblemParams(11, 1), HFunction("zero"), small_grid)
    _, profile = build_family(spec)
    delta = delta_nk(11, 1)
    decay = measure_decay(profile, delta)
    assert decay["fitted_rate"] == pytest.approx(delta, abs=1e-6)
    assert decay["du_rate"] == pytest.approx(delta - 1.0, abs=1e-6)
    assert decay["d2u_rate"] == pytest.approx(delta - 2.0, abs=1e-6)
    assert decay["log_coefficient"] is None
    assert decay["fit_r_squared"] > 0.999999


def test_power_regime_decay_with_source(small_grid):
    spec = FamilySpec(ProblemParams(13, 2), HFunction("const", a=1.0), small_grid)
    _, profile = build_family(spec)
    delta = delta_nk(13, 2)
    assert measure_decay(profile, delta)["fitted_rate"] == pytest.approx(delta, abs=1e-2)


def test_log_regime_decay(small_grid):
    spec = FamilySpec(ProblemParams(10, 1), HFunction("zero"), small_grid)
    _, profile = build_family(spec)
    decay = measure_decay(profile, delta_nk(10, 1))
    assert decay["fitted_rate"] == pytest.approx(0.0, abs=1e-6)
    assert decay["log_coefficient"] == pytest.approx(1.0, abs=1e-6)


def test_baseline_undefined_in_log_regime(small_grid):
    spec = FamilySpec(ProblemParams(10, 1), HFunction("zero"), small_grid)
    _, profile = build_family(spec)
    with pytest.raises(DomainError):
        decay_baseline(profile, 0.0)


def test_fit_decay_exact_power():
    r = np.geomspace(1e-7, 1.0, 500)
    fit = fit_decay(r, 3.0 * r ** -2.5)
    assert fit.rate == pytest.approx(-2.5, abs=1e-10)
    assert fit.r_squared == pytest.approx(1.0)
    assert math.exp(fit.intercept) == pytest.approx(3.0)
    with pytest.raises(DomainError, match="nonpositive"):
        fit_decay(r, -r)


@pytest.mark.parametrize("n, k, h", [(11, 1, HFunction("zero")), (13, 2, HFunction("const", a=1.0))])
def test_family_is_semistable(small_grid, n, k, h):
    spec = FamilySpec(ProblemParams(n, k), h, small_grid)
    _, profile = build_family(spec)
    report = min_rayleigh(profile, reconstruct_g(spec, profile), spec.params)
    assert report.verdict == "semistable"


def test_family_hardy_weight(small_grid):
    spec = FamilySpec(ProblemParams(11, 1), HFunction("zero"), small_grid)
    weight, _ = build_family(spec)
    alpha, beta = hardy_parameters(spec.params)
    for eta in default_bump_suite():
        result = hardy_check(weight, alpha, beta, spec.params, eta)
        assert result.conditions_ok
        assert result.passed


def test_family_ueta_identity(small_grid):
    spec = FamilySpec(ProblemParams(13, 2), HFunction("pow", a=1.0, b=1.0), small_grid)
    _, profile = build_family(spec)
    g = reconstruct_g(spec, profile)
    for eta in (Bump(0.3, 0.2), Bump(0.7, 0.25)):
        gap = q_ueta_identity_gap(profile, g, eta, spec.params)
        assert gap <= 1e-5 * q_radial_magnitude(profile, g, ueta_test(profile, eta), spec.params)


def test_observed_constants(small_grid):
    spec = FamilySpec(ProblemParams(11, 1), HFunction("zero"), small_grid)
    _, profile = build_family(spec)
    constants = observed_constants(profile, spec.params)
    assert set(constants) == {"u_constant", "oscillation_constant"}
    assert all(np.isfinite(v) and v > 0.0 for v in constants.values())


def _decade_values(profile, decades=4):
    marks = profile.grid.r_min * 10.0 ** np.arange(decades)
    return np.interp(np.log(marks), np.log(profile.r), profile.u)


def test_power_regime_profile_diverges(small_grid):
    spec = FamilySpec(ProblemParams(11, 1), HFunction("zero"), small_grid)
    _, profile = build_family(spec)
    steps = np.diff(_decade_values(profile))
    assert np.all(steps > 0.0)
    assert np.all(np.diff(steps) < 0.0)


def test_log_regime_profile_diverges(small_grid):
    spec = FamilySpec(ProblemParams(10, 1), HFunction("zero"), small_grid)
    _, profile = build_family(spec)
    np.testing.assert_allclose(np.diff(_decade_values(profile)), math.log(10.0), rtol=1e-3)


@pytest.mark.parametrize("n, k, h", [
    (10, 1, HFunction("zero")),
    (11, 1, HFunction("zero")),
    (13, 2, HFunction("const", a=1.0)),
])
def test_family_norm_is_finite(small_grid, n, k, h):
    spec = FamilySpec(ProblemParams(n, k), h, small_grid)
    _, profile = build_family(spec)
    norm = weighted_sobolev_norm(profile, spec.params, (small_grid.r_min, 1.0))
    assert norm.finite
    assert norm.value > 0.0
