import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gibbsk.errors import DomainError, InputError
from gibbsk.functionals import (
    ConstantsFit,
    coercivity_probe,
    constants_margins,
    ding,
    energy_E,
    energy_E_spectral,
    entropy,
    fit_constants,
    functional_report,
    j_chi,
    j_functional,
    j_functional_spectral,
    legendre_optimizer,
    legendre_value,
    log_integral_exp,
    lower_envelope_fit,
    mabuchi_energy,
    mabuchi_parts,
    mean_against_omega_phi_spectral,
    reference_nodes,
    smallest_ricci_compensation,
    twisting_form,
    verify_mabuchi_ding,
)
from gibbsk.geometry import (
    OneOneForm,
    PolarizedModel,
    Potential,
    build_quadrature,
    conic_density,
    eta_form,
    omega_form,
    random_family,
    random_potential,
    ricci_density,
    uniform_density,
)


@pytest.fixture(scope="module")
def family(model):
    return random_family(11, 100, 8, model)


def test_zero_potential_values(q, model):
    z = Potential.zeros(4)
    assert energy_E(z, q, model) == 0.0
    assert j_functional(z, q, model) == 0.0
    assert j_chi(z, omega_form(model), q, model) == 0.0
    assert ding(z, 0.5, None, q, model) == pytest.approx(0.0, abs=1e-14)
    assert entropy(z, None, q, model) == pytest.approx(0.0, abs=1e-14)
    assert mabuchi_energy(z, None, None, q, model) == pytest.approx(0.0, abs=1e-14)
    assert verify_mabuchi_ding(z, 0.5, None, None, q, model) == pytest.approx(0.0, abs=1e-9)


def test_energy_is_equivariant_and_others_invariant(q, model, family):
    for phi in family[:20]:
        kappa = 0.37
        shifted = phi.shifted(kappa)
        assert energy_E(shifted, q, model) == pytest.approx(energy_E(phi, q, model) + kappa, abs=1e-9)
        assert j_functional(shifted, q, model) == pytest.approx(j_functional(phi, q, model), abs=1e-9)
        assert ding(shifted, 0.5, None, q, model) == pytest.approx(ding(phi, 0.5, None, q, model), abs=1e-9)
        assert mabuchi_energy(shifted, None, None, q, model) == pytest.approx(
            mabuchi_energy(phi, None, None, q, model), abs=1e-9
        )


def test_energy_derivative_matches_finite_differences(q, model, family):
    # d/dt E(t phi) = (1/V) int phi omega_{t phi}
    phi, t0, h = family[5], 0.6, 1e-4
    fd = (energy_E(phi * (t0 + h), q, model) - energy_E(phi * (t0 - h), q, model)) / (2 * h)
    from gibbsk.geometry import omega_phi_ratio

    exact = q.integrate(phi.values(q) * omega_phi_ratio(phi * t0, q, model)) / model.V
    assert fd == pytest.approx(exact, abs=1e-6)


def test_quadrature_matches_spectral_oracle(q, model, family):
    for phi in family[:30]:
        assert energy_E(phi, q, model) == pytest.approx(energy_E_spectral(phi, model), abs=1e-12)
        assert j_functional(phi, q, model) == pytest.approx(j_functional_spectral(phi, model), abs=1e-12)


def test_j_nonnegative(q, model, family):
    assert min(j_functional(p, q, model) for p in family) >= -1e-8


def test_j_omega_identity(q, model, family):
    for phi in family[:30]:
        lhs = j_chi(phi, omega_form(model), q, model)
        rhs = energy_E_spectral(phi, model) - mean_against_omega_phi_spectral(phi, model)
        assert lhs == pytest.approx(rhs, abs=1e-9)


def test_j_chi_is_linear_in_chi(q, model, family):
    chi1 = OneOneForm(model.m, 0.4, Potential.harmonic(2, 1, 0.1))
    chi2 = OneOneForm(model.m, -1.3, Potential.harmonic(3, -2, 0.2))
    a, b = 0.7, -2.1
    for phi in family[:10]:
        combo = j_chi(phi, a * chi1 + b * chi2, q, model)
        assert combo == pytest.approx(a * j_chi(phi, chi1, q, model) + b * j_chi(phi, chi2, q, model), abs=1e-9)


def test_j_chi_rejects_other_model(q, model, family):
    with pytest.raises(InputError):
        j_chi(family[0], OneOneForm(2, 1.0), q, model)


def test_entropy_nonnegative_smooth_and_conic(q, model, family, conic_half):
    for phi in family[:30]:
        assert entropy(phi, None, q, model) >= -1e-6
        assert entropy(phi, conic_half, q, model) >= -1e-6


def test_entropy_rejects_unnormalized_density(q, model):
    from dataclasses import replace

    bad = replace(uniform_density(), normalization=2.0, _cache={})
    with pytest.raises(InputError):
        entropy(Potential.zeros(), bad, q, model)


def test_legendre_bounds_and_saturation(q, model, family):
    rng = np.random.default_rng(4)
    nodes = reference_nodes(None, q)
    for phi in family[:10]:
        ent = entropy(phi, None, q, model)
        for _ in range(20):
            a = random_potential(rng, 6, model, 0.5).values(nodes) * 3.0
            assert legendre_value(phi, a, None, q, model) <= ent + 1e-6
        a_star = legendre_optimizer(phi, None, q, model)
        assert abs(legendre_value(phi, a_star, None, q, model) - ent) < 1e-4


def test_mabuchi_is_sum_of_parts(q, model, family):
    for phi in family[:5]:
        ent, jt = mabuchi_parts(phi, None, None, q, model)
        assert mabuchi_energy(phi, None, None, q, model) == ent + jt
        assert jt == pytest.approx(j_chi(phi, -ricci_density(uniform_density(), q, model), q, model), abs=1e-12)


def test_conic_b_one_matches_smooth_values(q, model, family, north):
    f1 = conic_density([north], 1.0, q)
    eta1 = eta_form([north], 1.0, model)
    for phi in family[:5]:
        assert mabuchi_energy(phi, f1, eta1, q, model) == pytest.approx(
            mabuchi_energy(phi, None, None, q, model), abs=1e-8
        )


def test_ding_monotone_in_gamma(q, model, family):
    gammas = (0.2, 0.5, 1.0, 2.0)
    for phi in family:
        vals = [ding(phi, g, None, q, model) for g in gammas]
        assert all(a >= b - 1e-9 for a, b in zip(vals, vals[1:]))


def test_ding_rejects_nonpositive_gamma(q, model):
    with pytest.raises(InputError):
        ding(Potential.zeros(), 0.0, None, q, model)


def test_log_integral_exp_does_not_overflow():
    w = np.array([0.5, 0.5])
    assert log_integral_exp(np.array([1000.0, 1000.0]), w) == pytest.approx(1000.0)


@pytest.mark.parametrize("gamma", [0.2, 0.5, 1.0])
def test_mabuchi_ding_margin_nonnegative(q, model, family, conic_half, north, gamma):
    eta = eta_form([north], 0.5, model)
    for phi in family[:40]:
        assert verify_mabuchi_ding(phi, gamma, None, None, q, model) >= -1e-6
        assert verify_mabuchi_ding(phi, gamma, conic_half, eta, q, model) >= -1e-6


def test_mabuchi_ding_nearly_saturated_near_optimizer(q, model):
    # phi = 0 saturates the Legendre bound for f = 1; the slack grows quadratically
    phi = Potential.harmonic(2, 0, 0.01)
    assert 0 <= verify_mabuchi_ding(phi, 0.5, None, None, q, model) < 1e-3


def test_report_roundtrip_and_negative_j_guard(q, model, family):
    rep = functional_report(family[3], 0.5, 1.0, None, None, q, model)
    assert rep.mabuchi == rep.M
    assert set(rep.to_dict()) >= {"E", "J", "J_chi", "Ent", "M", "D", "gamma", "tau", "tolerances"}
    with pytest.raises(DomainError):
        type(rep)(**{**rep.to_dict(), "J": -1.0})
    with pytest.raises(InputError):
        functional_report(family[3], -0.5, 1.0, None, None, q, model)


def test_fit_constants_on_zero_family(q, model):
    fit = fit_constants([Potential.zeros(2)], q, model, ks=(2,))
    assert fit.C == 0.0
    assert fit.A is None


def test_fit_constants_empty_family(q, model):
    with pytest.raises(InputError):
        fit_constants([], q, model)


def test_ricci_compensation_for_fubini_study(q, model):
    assert smallest_ricci_compensation(q, model) == 0.0


def test_fitted_constants_hold_on_heldout_family(q_small, model):
    fam = random_family(20, 40, 6, model)
    held = random_family(21, 40, 6, model)
    fit = fit_constants(fam, q_small, model, ks=(2, 3))
    assert fit.A is not None and fit.A > 0
    margins = constants_margins(fit, held, q_small, model)
    assert min(margins.values()) >= -1e-6


def test_coercivity_probes(q, model, family):
    rep = coercivity_probe("J", family, q, model)
    assert rep.slope == pytest.approx(1.0, abs=1e-9)
    assert rep.intercept == pytest.approx(0.0, abs=1e-9)
    assert coercivity_probe("J_omega", family, q, model).slope > 0
    assert coercivity_probe("mabuchi", family, q, model).slope > 0
    with pytest.raises(InputError):
        coercivity_probe("nope", family, q, model)


def test_envelope_lies_below_points():
    rng = np.random.default_rng(0)
    x, y = rng.uniform(0, 1, 50), rng.normal(size=50)
    s, c = lower_envelope_fit(x, y)
    assert np.all(y >= s * x + c - 1e-12)
    with pytest.raises(DomainError):
        lower_envelope_fit([1.0, 1.0], [0.0, 1.0])


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), kappa=st.floats(-5, 5))
def test_cocycle_property(seed, kappa):
    model = PolarizedModel(1)
    q = build_quadrature(32, 64, model)
    phi = random_potential(np.random.default_rng(seed), 6, model, 0.7)
    assert energy_E(phi.shifted(kappa), q, model) - energy_E(phi, q, model) == pytest.approx(kappa, abs=1e-9)
