import json

import numpy as np
import pytest

from gibbsk.errors import DomainError, InputError
from gibbsk.geometry import PolarizedModel, build_quadrature
from gibbsk.harness import (
    SuiteResult,
    _finish,
    _rel,
    density_exponent,
    digest,
    log_density_integral,
    seeded_family,
    suite_bergman,
    suite_identities,
    suite_legendre,
    suite_mabuchi_ding,
    suite_quantized_ding,
)
from gibbsk.io import dumps


def test_finish_reports_closest_record():
    recs = [
        {"case": 0, "margin": 0.5, "tolerance": 0.1},
        {"case": 1, "margin": -0.05, "tolerance": 0.1},
        {"case": 2, "margin": -0.01, "tolerance": 0.0},
    ]
    res = _finish("demo", recs, {}, "advice")
    assert not res.passed
    assert res.worst_margin == -0.01 and res.tolerance == 0.0
    assert res.advice == "advice"
    assert (res.worst_margin >= -res.tolerance) == res.passed
    with pytest.raises(InputError):
        _finish("empty", [], {})


def test_relative_error_has_scale_floor():
    assert _rel(0.0, 2e-16) < 1e-9
    assert _rel(1.0, 1.1) == pytest.approx(0.1 / 1.1)


def test_seeded_family_is_deterministic(model):
    a = seeded_family(3, 5, 6, model)
    b = seeded_family(3, 5, 6, model)
    assert [digest(p) for p in a] == [digest(p) for p in b]
    assert not np.any(a[0].coefficients)


def test_density_exponent_requires_convergent_regime():
    assert density_exponent(3, 1.0, 0.5) == pytest.approx(1.5)
    with pytest.raises(InputError):
        density_exponent(1, 1.0, 0.6)


def test_log_density_integral_gate(q, conic_half):
    assert log_density_integral(None, 2.0, q) == 0.0
    with pytest.raises(InputError):
        log_density_integral(conic_half, 2.0, q)
    assert log_density_integral(conic_half, 1.5, q) == pytest.approx(np.log(0.5**1.5 / 0.25), rel=1e-6)


def test_identities_small_run(q, model):
    res = suite_identities(q, model, n_cases=6, seed=2)
    assert res.passed and res.cases == 6
    json.loads(dumps(res))


def test_coarse_grid_fails_with_advice(model):
    coarse = build_quadrature(8, 16, model)
    res = suite_identities(coarse, model, n_cases=4, seed=2)
    assert not res.passed and res.advice


def test_mabuchi_ding_small_run(q, model):
    res = suite_mabuchi_ding(q, model, n_cases=4, seed=1)
    assert res.passed
    assert {r["density"] for r in res.records} == {"uniform", "conic_b1/2"}


def test_legendre_small_run(q, model):
    assert suite_legendre(q, model, n_cases=4, seed=1, n_tests=5).passed


def test_quantized_ding_refuses_divergent_gamma(q, model):
    with pytest.raises((InputError, DomainError)):
        suite_quantized_ding(k=1, tau=1.0, gamma=0.6, n_mc=1000, q=q, model=model, n_cases=2)


def test_quantized_ding_small_run(q, model):
    res = suite_quantized_ding(k=3, n_mc=100_000, seed=2, q=q, model=model, n_cases=3)
    assert res.passed
    assert all({"lhs", "rhs", "rhs_verbatim", "stderr"} <= set(r) for r in res.records)


def test_bergman_small_run(q, model):
    res = suite_bergman(q, model, n_cases=2, seed=3)
    assert res.passed and res.cases == 2
    with pytest.raises(InputError):
        suite_bergman(q, model, ks=(4, 2))


def test_summary_line():
    res = SuiteResult("x", 1, 0.0, 1e-6, True)
    assert res.summary().startswith("x: PASS")
