import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gibbsk.errors import DomainError, InputError
from gibbsk.geometry import (
    PolarizedModel,
    Potential,
    build_quadrature,
    conic_density,
    eta_form,
    from_stereographic,
    harmonic_index,
    is_admissible,
    n_harmonics,
    omega_phi_ratio,
    plain_grid_normalization,
    random_family,
    random_potential,
    real_sph_harm,
    ricci_density,
    smooth_density,
    stereographic,
    uniform_density,
)


def test_quadrature_mass_equals_volume():
    for m in (1, 2, 5):
        q = build_quadrature(32, 64, PolarizedModel(m))
        assert abs(q.weights.sum() - m) <= 1e-12 * m


def test_quadrature_kills_nonconstant_harmonics(q_small):
    Y = q_small.harmonics(30)
    integrals = q_small.weights @ Y[:, 1:]
    assert np.max(np.abs(integrals)) < 1e-10


def test_harmonic_norm_matches_closed_form(q_small):
    # orthonormal on the unit sphere, so int Y^2 d(omega) = V / (4 pi)
    y = q_small.harmonics(3)[:, harmonic_index(3, 2)]
    assert abs(q_small.integrate(y * y) - 1.0 / (4 * math.pi)) < 1e-10


def test_harmonics_match_closed_form_y10():
    theta = np.linspace(0.1, 3.0, 7)
    Y = real_sph_harm(1, theta, np.zeros_like(theta))
    assert np.allclose(Y[:, harmonic_index(1, 0)], math.sqrt(3 / (4 * math.pi)) * np.cos(theta))


@pytest.mark.parametrize("bad", [(1, 8), (8, 1)])
def test_quadrature_rejects_tiny_grids(bad):
    with pytest.raises(InputError):
        build_quadrature(*bad, PolarizedModel(1))


def test_model_rejects_nonpositive_degree():
    with pytest.raises(InputError):
        PolarizedModel(0)


def test_zero_potential_gives_unit_ratio(q, model):
    assert np.all(omega_phi_ratio(Potential.zeros(4), q, model) == 1.0)


def test_mass_conservation_on_random_family(q, model):
    for phi in random_family(3, 20, 8, model):
        assert abs(q.integrate(omega_phi_ratio(phi, q, model)) - model.V) < 1e-10


def test_laplacian_matches_finite_differences():
    # phi = eps * Y_2^0 depends on theta only; Delta = (1/sin) d/dtheta (sin d/dtheta)
    eps, h = 0.1, 1e-4
    phi = Potential.harmonic(2, 0, eps)
    theta = np.linspace(0.3, 2.8, 9)
    from gibbsk.geometry import angles_to_points

    def f(t):
        return phi.values(angles_to_points(t, np.zeros_like(t)))

    d2 = (f(theta + h) - 2 * f(theta) + f(theta - h)) / h**2
    d1 = (f(theta + h) - f(theta - h)) / (2 * h)
    fd = d2 + d1 * np.cos(theta) / np.sin(theta)
    spectral = phi.laplacian(angles_to_points(theta, np.zeros_like(theta)))
    assert np.max(np.abs(fd - spectral)) < 1e-6


def test_non_kahler_potential_is_rejected(q, model):
    phi = Potential.harmonic(2, 0, 5.0)
    assert not is_admissible(phi, q, model)
    with pytest.raises(DomainError, match="node"):
        omega_phi_ratio(phi, q, model)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), amp=st.floats(0.0, 0.95))
def test_random_potentials_are_admissible(seed, amp):
    model = PolarizedModel(1)
    q = build_quadrature(40, 80, model)
    phi = random_potential(np.random.default_rng(seed), 8, model, amp)
    u = omega_phi_ratio(phi, q, model)
    assert np.min(u) > 0
    # the scale is sampled on a finite grid; the true sup overshoots by a few percent
    assert np.max(np.abs(u - 1)) <= 1.06 * amp


def test_random_potential_rejects_large_amplitude(model):
    with pytest.raises(InputError):
        random_potential(np.random.default_rng(0), 4, model, 0.99)


def test_potential_arithmetic_and_padding():
    a = Potential.harmonic(1, 0, 2.0)
    b = Potential.harmonic(3, -2, 1.0)
    c = a + b
    assert c.l_max == 3
    assert c.coefficients[harmonic_index(1, 0)] == 2.0
    assert np.allclose((c - b).padded(3), a.padded(3))
    assert np.allclose((c * 2.0).coefficients, 2.0 * c.coefficients)
    assert c.shifted(1.5).mean == pytest.approx(c.mean + 1.5)


def test_potential_json_roundtrip():
    phi = random_potential(np.random.default_rng(1), 5, PolarizedModel(1), 0.5)
    back = Potential.from_dict(phi.to_dict())
    assert np.array_equal(back.coefficients, phi.coefficients)


def test_flipped_potential_is_rotation_pullback():
    phi = random_potential(np.random.default_rng(2), 5, PolarizedModel(1), 0.5)
    x = from_stereographic(np.array([0.3 + 0.2j, -1.1 + 0.5j]))
    rot = x * np.array([1.0, -1.0, -1.0])
    assert np.allclose(phi.flipped().values(x), phi.values(rot))


@settings(max_examples=50, deadline=None)
@given(re=st.floats(-50, 50), im=st.floats(-50, 50))
def test_stereographic_roundtrip(re, im):
    z = complex(re, im)
    assert abs(stereographic(from_stereographic(z))[0] - z) <= 1e-9 * max(1.0, abs(z))


def test_uniform_density_is_probability(q):
    assert uniform_density().nodes(q).total == pytest.approx(1.0, abs=1e-12)


def test_conic_b_one_is_uniform(q, north):
    assert conic_density([north], 1.0, q) is uniform_density()


def test_conic_normalization_matches_radial_integral(conic_half, q):
    # t = |x - p|^2 / 4 is uniform on [0, 1] under omega / V, so Z = int_0^1 t^(b-1) dt = 1/b
    assert conic_half.normalization == pytest.approx(2.0, abs=1e-8)
    assert conic_half.nodes(q).total == pytest.approx(1.0, abs=1e-8)


@pytest.mark.parametrize("b", [0.25, 0.5, 0.8])
def test_conic_power_integral_oracle(q, north, b):
    f = conic_density([north], b, q)
    for p in (1.0, 1.2):
        if p * (1 - b) < 1:
            expected = b**p / (1 - p * (1 - b))
            assert f.power_integral(p, q) == pytest.approx(expected, rel=1e-6)


def test_plain_grid_approaches_adaptive_value(model, north):
    errs = []
    for n in (16, 64, 256):
        qq = build_quadrature(n, 2 * n, model)
        errs.append(abs(plain_grid_normalization([north], 0.5, qq) - 2.0))
    assert errs[0] > errs[1] > errs[2]
    assert errs[-1] < 1e-2


def test_two_point_conic_is_normalized(q):
    f = conic_density([[0, 0, 1], [1, 0, 0]], 0.75, q)
    assert f.nodes(q).total == pytest.approx(1.0, abs=1e-8)


def test_integrability_gate(conic_half):
    with pytest.raises(DomainError):
        conic_half.check_integrability(2.5)
    conic_half.check_integrability(1.5)


@pytest.mark.parametrize("b", [0.0, 1.5])
def test_conic_rejects_bad_b(q, north, b):
    with pytest.raises(InputError):
        conic_density([north], b, q)


def test_conic_rejects_duplicate_points(q, north):
    with pytest.raises(InputError):
        conic_density([north, north], 0.5, q)


def test_ricci_of_fubini_study_is_two(q, model):
    ric = ricci_density(uniform_density(), q, model)
    assert np.allclose(ric.values(q), 2.0)
    assert ric.mass == 2.0


def test_ricci_mass_invariant_under_smooth_change(q, model):
    dV = smooth_density(Potential.harmonic(1, 0, 0.3), q)
    ric = ricci_density(dV, q, model)
    assert abs(q.integrate(ric.values(q)) - 2.0) < 1e-8


def test_ricci_matches_finite_difference_of_log_density(model):
    # Ric dV = -dd^c log(density); on the sphere with omega = omega_FS this is 2 + Delta(psi)
    psi = Potential.harmonic(2, 0, 0.2)
    from gibbsk.geometry import angles_to_points

    dV = smooth_density(psi, build_quadrature(32, 64, model))
    ric = ricci_density(dV, None, model)
    theta, h = np.linspace(0.4, 2.7, 6), 1e-4

    def logd(t):
        return -psi.values(angles_to_points(t, np.zeros_like(t)))

    lap = (logd(theta + h) - 2 * logd(theta) + logd(theta - h)) / h**2
    lap += (logd(theta + h) - logd(theta - h)) / (2 * h) * np.cos(theta) / np.sin(theta)
    g = ric.values(angles_to_points(theta, np.zeros_like(theta)))
    assert np.max(np.abs(g - (2.0 - lap))) < 1e-5


def test_ricci_of_conic_measure_is_refused(conic_half, model):
    with pytest.raises(DomainError):
        ricci_density(conic_half, None, model)


def test_eta_masses(model):
    assert eta_form([[0, 0, 1]], 1.0, model).mass == 0.0
    assert eta_form([[0, 0, 1]], 0.5, model).mass == 0.5
    assert eta_form([[0, 0, 1], [0, 0, -1]], 0.75, model).mass == 0.5


def test_harmonic_count():
    assert n_harmonics(8) == 81
