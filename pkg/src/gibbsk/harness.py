"""Verification suites: identities, inequalities and fitted-constant sweeps.

Every check produces a record with a signed ``margin`` and a ``tolerance``; a
record passes when ``margin >= -tolerance``. A suite reports the record closest
to failing, so ``passed`` is equivalent to ``worst_margin >= -tolerance``.
"""

from __future__ import annotations

import dataclasses
import hashlib
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import DomainError, InputError
from .functionals import (
    ConstantsFit,
    _ding_gap_ratio,
    energy_E,
    energy_E_spectral,
    entropy,
    fit_constants,
    j_chi,
    legendre_optimizer,
    legendre_value,
    mabuchi_energy,
    mean_against_omega_phi_spectral,
    reference_nodes,
    twisting_form,
    verify_mabuchi_ding,
)
from .geometry import (
    Density,
    OneOneForm,
    PolarizedModel,
    Potential,
    SphereQuadrature,
    build_quadrature,
    conic_density,
    eta_form,
    omega_form,
    random_family,
    random_potential,
    uniform_density,
)
from .gibbs import partition_mc, require_convergent
from .quantization import approx_ding, gram_identity_check, energy_Ek, log_factorial, section_basis
from .streams import check_seed, substream, worker_count

IDENTITY_REL_TOL = 1e-8
REL_FLOOR = 1e-6
MABUCHI_DING_TOL = 1e-6
LEGENDRE_BOUND_TOL = 1e-6
LEGENDRE_GAP_TOL = 1e-4
HELDOUT_TOL = 1e-6
MC_SIGMAS = 3.0
GRAM_IDENTITY_GRID = (12, 24)


@dataclass
class SuiteResult:
    name: str
    cases: int
    worst_margin: float
    tolerance: float
    passed: bool
    records: list = field(default_factory=list)
    params: dict = field(default_factory=dict)
    advice: str | None = None
    extras: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def summary(self) -> str:
        flag = "PASS" if self.passed else "FAIL"
        return f"{self.name}: {flag} cases={self.cases} worst_margin={self.worst_margin:.3e} tol={self.tolerance:.1e}"


def digest(obj) -> str:
    if isinstance(obj, Potential):
        data = obj.coefficients.tobytes()
    elif isinstance(obj, np.ndarray):
        data = np.ascontiguousarray(obj).tobytes()
    else:
        data = repr(obj).encode()
    return hashlib.sha256(data).hexdigest()[:16]


def _finish(name: str, records: list, params: dict, advice: str | None = None, extras: dict | None = None) -> SuiteResult:
    if not records:
        raise InputError(f"suite {name} produced no cases")
    worst = min(records, key=lambda r: r["margin"] + r["tolerance"])
    passed = all(r["margin"] >= -r["tolerance"] for r in records)
    return SuiteResult(
        name,
        len({r["case"] for r in records}),
        float(worst["margin"]),
        float(worst["tolerance"]),
        passed,
        records,
        params,
        None if passed else advice,
        extras or {},
    )


def _map(fn: Callable, items: Sequence, workers: int | None = None) -> list:
    nw = min(worker_count(workers), max(1, len(items)))
    if nw == 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=nw) as pool:
        return list(pool.map(fn, items))


def _rel(a: float, b: float) -> float:
    """Relative error; the scale floor keeps 0 = 0 cases from dividing roundoff by zero."""
    return abs(a - b) / max(abs(a), abs(b), REL_FLOOR)


def _record(check: str, case: int, seed: int, phi, margin: float, tol: float, **extra) -> dict:
    rec = {"check": check, "case": case, "seed": seed, "digest": digest(phi), "margin": float(margin), "tolerance": tol}
    rec.update({k: float(v) if isinstance(v, (float, np.floating)) else v for k, v in extra.items()})
    return rec


def seeded_family(seed: int, n: int, l_max: int, model: PolarizedModel, include_zero: bool = True, amplitude: float = 0.8):
    """``n`` potentials; the first is ``phi = 0`` when ``include_zero``."""
    check_seed(seed)
    fam = random_family(seed, n - int(include_zero), l_max, model, amplitude) if n > int(include_zero) else []
    return ([Potential.zeros(l_max)] if include_zero else []) + list(fam)


# ---------------------------------------------------------------------------


def suite_identities(
    q: SphereQuadrature,
    model: PolarizedModel,
    n_cases: int = 100,
    seed: int = 0,
    l_max: int = 8,
    workers: int | None = None,
) -> SuiteResult:
    """Energy identity, entropy/Legendre duality and the Gram determinant formula."""
    if n_cases < 1:
        raise InputError("n_cases must be at least 1")
    family = seeded_family(seed, n_cases, l_max, model)
    q_gram = build_quadrature(*GRAM_IDENTITY_GRID, model)
    omega = omega_form(model)

    def case(i):
        phi = family[i]
        lhs = j_chi(phi, omega, q, model)
        rhs = energy_E_spectral(phi, model) - mean_against_omega_phi_spectral(phi, model)
        recs = [_record("energy_identity", i, seed, phi, -_rel(lhs, rhs), IDENTITY_REL_TOL, lhs=lhs, rhs=rhs)]
        ent = entropy(phi, None, q, model)
        dual = legendre_value(phi, legendre_optimizer(phi, None, q, model), None, q, model)
        recs.append(_record("legendre_duality", i, seed, phi, -_rel(ent, dual), IDENTITY_REL_TOL, lhs=dual, rhs=ent))
        k = 1 + i % 2
        gi = gram_identity_check(phi, section_basis(model.m, k), q_gram, mode="tensor")
        recs.append(_record("gram_determinant", i, seed, phi, -gi.rel_error, IDENTITY_REL_TOL, lhs=gi.lhs, rhs=gi.rhs, k=k))
        return recs

    records = [r for rs in _map(case, range(n_cases), workers) for r in rs]
    advice = (
        f"quadrature {q.n_polar}x{q.n_azimuth} integrates polynomials of degree <= {q.exactness} only; "
        f"potentials of degree {l_max} need at least {2 * l_max + 1}: refine (e.g. 64x128)"
    )
    return _finish(
        "identities",
        records,
        {"n_cases": n_cases, "seed": seed, "l_max": l_max, "m": model.m, "grid": [q.n_polar, q.n_azimuth]},
        advice,
    )


def default_conic(q: SphereQuadrature, b: float = 0.5) -> Density:
    return conic_density([[0.0, 0.0, 1.0]], b, q)


def suite_mabuchi_ding(
    q: SphereQuadrature,
    model: PolarizedModel,
    n_cases: int = 100,
    seed: int = 0,
    gammas: Sequence[float] = (0.2, 0.5, 1.0),
    densities: dict | None = None,
    l_max: int = 8,
    workers: int | None = None,
) -> SuiteResult:
    """``M_{f,eta} - gamma D_{-gamma,f} - J_{-Ric dV + eta + gamma omega} >= 0``."""
    family = seeded_family(seed, n_cases, l_max, model)
    if densities is None:
        conic = default_conic(q)
        densities = {
            "uniform": (uniform_density(), None),
            "conic_b1/2": (conic, eta_form(conic.points, conic.b, model)),
        }

    def case(i):
        phi = family[i]
        out = []
        for label, (f, eta) in densities.items():
            for g in gammas:
                margin = verify_mabuchi_ding(phi, g, f, eta, q, model)
                out.append(_record("mabuchi_ding", i, seed, phi, margin, MABUCHI_DING_TOL, density=label, gamma=g))
        return out

    records = [r for rs in _map(case, range(n_cases), workers) for r in rs]
    return _finish(
        "mabuchi_ding",
        records,
        {"n_cases": n_cases, "seed": seed, "gammas": list(gammas), "densities": list(densities)},
        "refine the quadrature; the margin is a Legendre gap and is nonnegative in exact arithmetic",
    )


def suite_legendre(
    q: SphereQuadrature,
    model: PolarizedModel,
    n_cases: int = 50,
    seed: int = 0,
    f: Density | None = None,
    n_tests: int = 20,
    l_max: int = 8,
    workers: int | None = None,
) -> SuiteResult:
    """Sampled lower bounds ``int a dnu - log int e^a dmu <= Ent`` and saturation at ``log(nu/mu)``."""
    family = seeded_family(seed, n_cases, l_max, model)
    nodes = reference_nodes(f, q)

    def case(i):
        phi = family[i]
        ent = entropy(phi, f, q, model)
        rng = substream(seed, 1 << 20 | i)
        out = []
        for t in range(n_tests):
            a = random_potential(rng, l_max, model, amplitude=0.9).values(nodes) * (1.0 + 4.0 * rng.uniform())
            out.append(_record("lower_bound", i, seed, phi, ent - legendre_value(phi, a, f, q, model), LEGENDRE_BOUND_TOL, test=t))
        gap = abs(ent - legendre_value(phi, legendre_optimizer(phi, f, q, model), f, q, model))
        out.append(_record("saturation", i, seed, phi, -gap, LEGENDRE_GAP_TOL))
        return out

    records = [r for rs in _map(case, range(n_cases), workers) for r in rs]
    desc = (uniform_density() if f is None else f).describe()
    return _finish("legendre", records, {"n_cases": n_cases, "seed": seed, "density": desc}, "refine the quadrature")


# ---------------------------------------------------------------------------
# partition-function inequalities


def density_exponent(k: int, tau: float, gamma: float) -> float:
    """``k tau / (k tau - gamma (1 + tau))``; requires ``k tau > gamma (1 + tau)``."""
    if not k * tau > gamma * (1.0 + tau):
        raise InputError(
            f"need k tau / (gamma (1 + tau)) > 1, got {k * tau / (gamma * (1.0 + tau)):.6g} "
            f"(k={k}, tau={tau}, gamma={gamma})"
        )
    return k * tau / (k * tau - gamma * (1.0 + tau))


def log_density_integral(f: Density | None, p: float, q: SphereQuadrature) -> float:
    """``log int f^p dV`` after the integrability gate; exactly 0 for ``f = 1``."""
    f = uniform_density() if f is None else f
    try:
        f.check_integrability(p)
    except DomainError as exc:
        raise InputError(f"density fails the integrability precondition f in L^{p:.6g}: {exc}") from exc
    return 0.0 if f.is_uniform else math.log(f.power_integral(p, q))


@dataclass
class PartitionTerm:
    """``-(1/(scale N)) log Z`` with its propagated standard error."""

    value: float
    stderr: float
    Z: float
    Z_stderr: float
    N: int
    estimate: dict


def _partition_term(k, m, g_eff, scale, f, n_mc, seed, workers) -> PartitionTerm:
    require_convergent(g_eff, k, m, f)
    est = partition_mc(g_eff, k, f, n_mc, seed, m=m, workers=workers)
    require_convergent(g_eff, k, m, f, est)
    N = section_basis(m, k).N
    return PartitionTerm(
        -est.log_mean / (scale * N),
        est.stderr / (est.mean * scale * N),
        est.mean,
        est.stderr,
        N,
        est.to_dict(),
    )


def suite_quantized_ding(
    k: int = 3,
    tau: float = 1.0,
    gamma: float = 0.5,
    f: Density | None = None,
    n_mc: int = 1_000_000,
    seed: int = 0,
    q: SphereQuadrature | None = None,
    model: PolarizedModel | None = None,
    n_cases: int = 20,
    l_max: int = 8,
    workers: int | None = None,
) -> SuiteResult:
    """Constant-free bound of ``-log Z / (gamma (1+tau) N)`` by the quantized Ding functional.

    The right side uses the exact ``log N! / (N k)``; the looser ``(1/k) log N``
    form is reported alongside in each record.
    """
    model = PolarizedModel(1) if model is None else model
    q = build_quadrature(64, 128, model) if q is None else q
    if not (gamma > 0 and tau > 0):
        raise InputError("gamma and tau must be positive")
    p = density_exponent(k, tau, gamma)
    dens = (k * tau - gamma * (1 + tau)) / (gamma * k * (1 + tau)) * log_density_integral(f, p, q)
    g_eff = gamma * (1 + tau)
    Zt = _partition_term(k, model.m, g_eff, g_eff, f, n_mc, seed, workers)
    basis = section_basis(model.m, k)
    stirling = log_factorial(basis.N) / (basis.N * k)
    verbatim = math.log(basis.N) / k
    tol = MC_SIGMAS * Zt.stderr
    family = seeded_family(seed, n_cases, l_max, model)

    def case(i):
        phi = family[i]
        dk = approx_ding(phi, gamma, f, basis, q, model)
        rhs = dk + stirling + dens
        return _record(
            "quantized_ding",
            i,
            seed,
            phi,
            rhs - Zt.value,
            tol,
            lhs=Zt.value,
            rhs=rhs,
            rhs_verbatim=dk + verbatim + dens,
            stderr=Zt.stderr,
        )

    records = _map(case, range(n_cases), workers)
    params = {
        "k": k,
        "tau": tau,
        "gamma": gamma,
        "m": model.m,
        "n_mc": n_mc,
        "seed": seed,
        "density": (uniform_density() if f is None else f).describe(),
        "exponent": p,
    }
    extras = {"density_term": dens, "partition": Zt.estimate, "lhs": Zt.value, "lhs_stderr": Zt.stderr}
    return _finish("quantized_ding", records, params, "increase n_mc or check the density gate", extras)


@dataclass
class _CoercivityCase:
    k: int
    J_omega: float
    J_twist: float
    M: float
    Z: PartitionTerm
    dens: float
    dens_alt: float
    c: float


def _coercivity_margin(t: _CoercivityCase, gamma: float, C1: float) -> float:
    """``RHS - LHS`` of the theorem at constant ``C1``."""
    g_eps = gamma * (1.0 - t.c / t.k)
    g_prime = g_eps * (1.0 - C1 / t.k)
    N = t.Z.N
    lhs = t.Z.value + t.J_twist + g_prime * t.J_omega
    rhs = t.M + t.dens + gamma / t.k * math.log(N) + C1 * g_eps
    return rhs - lhs


def _coercivity_ratio(t: _CoercivityCase, gamma: float) -> float:
    """Smallest ``C1`` making the margin nonnegative (the margin is affine in ``C1``)."""
    g_eps = gamma * (1.0 - t.c / t.k)
    base = -_coercivity_margin(t, gamma, 0.0)
    return base / (g_eps * (t.J_omega / t.k + 1.0))


def suite_coercivity(
    ks: Sequence[int] = (2, 3, 4),
    tau: float = 1.0,
    gamma: float = 0.5,
    f: Density | None = None,
    eta: OneOneForm | None = None,
    family: list | None = None,
    heldout: list | None = None,
    n_mc: int = 1_000_000,
    seed: int = 0,
    q: SphereQuadrature | None = None,
    model: PolarizedModel | None = None,
    n_family: int = 100,
    l_max: int = 8,
    safety: float = 0.1,
    workers: int | None = None,
) -> tuple[SuiteResult, ConstantsFit]:
    """Fit the smallest ``C1 >= 0`` over ``family`` and re-check it on ``heldout``.

    ``C1`` must also cover the quantized-Ding comparison (the same constant
    feeds both statements), so the fit takes the larger of the two residual
    maxima. The per-``k`` fits measure the ``k``-dependence.
    """
    model = PolarizedModel(1) if model is None else model
    q = build_quadrature(64, 128, model) if q is None else q
    if not (gamma > 0 and tau > 0):
        raise InputError("gamma and tau must be positive")
    family = seeded_family(seed, n_family, l_max, model) if family is None else family
    heldout = seeded_family(seed + 1, n_family, l_max, model, include_zero=False) if heldout is None else heldout
    fit = fit_constants(family, q, model, tuple(ks), gamma, f, safety=safety)
    c = fit.c
    twist = twisting_form(eta, model)
    omega = omega_form(model)

    def evaluate(phis, k, Zt, dens, dens_alt):
        out = []
        for phi in phis:
            jt = j_chi(phi, twist, q, model)
            M = mabuchi_energy(phi, f, eta, q, model)
            out.append(_CoercivityCase(k, j_chi(phi, omega, q, model), jt, M, Zt, dens, dens_alt, c))
        return out

    per_k, cases_fit, cases_held = {}, {}, {}
    for k in ks:
        if c / k >= 1:
            raise InputError(f"c/k = {c / k:.3g} must be below 1")
        p = density_exponent(k, tau, gamma)
        ld = log_density_integral(f, p, q)
        dens = (k * tau - gamma) / (k * (1 + tau)) * ld
        dens_alt = (k * tau - gamma * (1 + tau)) / (k * (1 + tau)) * ld
        Zt = _partition_term(k, model.m, gamma * (1 + tau), 1 + tau, f, n_mc, seed, workers)
        cases_fit[k] = evaluate(family, k, Zt, dens, dens_alt)
        cases_held[k] = evaluate(heldout, k, Zt, dens, dens_alt)
        thm = max(_coercivity_ratio(t, gamma) for t in cases_fit[k])
        p34 = max(_ding_gap_ratio(phi, k, c, gamma, f, q, model, None) for phi in family)
        per_k[k] = {"theorem_raw": thm, "ding_gap_raw": p34, "C1": max(0.0, thm, p34), "Z": Zt.estimate}

    raw = max(v["C1"] for v in per_k.values())
    C1 = raw * (1.0 + safety)
    fit = dataclasses.replace(fit, C1=C1, raw={**fit.raw, "C1": raw, "C1_per_k": {str(k): v["C1"] for k, v in per_k.items()}})
    vals = [v["C1"] for v in per_k.values()]
    variation = 0.0 if max(vals) == 0 else (max(vals) - min(vals)) / max(vals)

    records = []
    for k in ks:
        for i, (t, phi) in enumerate(zip(cases_held[k], heldout)):
            tol = HELDOUT_TOL + MC_SIGMAS * t.Z.stderr
            records.append(
                _record("coercivity", i, seed + 1, phi, _coercivity_margin(t, gamma, C1), tol, k=k, density_term_alt=t.dens_alt)
            )
            g_eps = gamma * (1 - c / k)
            r = _ding_gap_ratio(phi, k, c, gamma, f, q, model, None)
            records.append(_record("ding_gap", i, seed + 1, phi, (C1 - r) * g_eps * (t.J_omega / k + 1.0), HELDOUT_TOL, k=k))
    params = {
        "ks": list(ks),
        "tau": tau,
        "gamma": gamma,
        "m": model.m,
        "n_mc": n_mc,
        "seed": seed,
        "n_family": len(family),
        "n_heldout": len(heldout),
        "density": (uniform_density() if f is None else f).describe(),
    }
    extras = {
        "C1": C1,
        "C1_raw": raw,
        "per_k": {str(k): v for k, v in per_k.items()},
        "variation": variation,
        "c": c,
    }
    res = _finish("coercivity", records, params, "increase n_mc or enlarge the fitting family", extras)
    return res, fit


def suite_bergman(
    q: SphereQuadrature,
    model: PolarizedModel,
    ks: Sequence[int] = (2, 4, 8, 16),
    n_cases: int = 10,
    seed: int = 0,
    l_max: int = 8,
    terminal_tol: float = 1e-2,
    workers: int | None = None,
) -> SuiteResult:
    """Quantized energies converge: ``|E_k(phi) - E_k(0) - E(phi)|`` decreases in ``k``.

    Each case yields a ``decreasing`` record (margin = smallest drop between
    consecutive levels, which must be positive) and a ``terminal`` record.
    """
    ks = tuple(int(k) for k in ks)
    if len(ks) < 2 or any(b <= a for a, b in zip(ks, ks[1:])):
        raise InputError("ks must be strictly increasing with at least two levels")
    family = seeded_family(seed, n_cases, l_max, model, include_zero=False)
    bases = [section_basis(model.m, k) for k in ks]
    zero = Potential.zeros()
    base = [energy_Ek(zero, b, q, model) for b in bases]

    def case(i):
        phi = family[i]
        E = energy_E(phi, q, model)
        errs = [abs(energy_Ek(phi, b, q, model) - e0 - E) for b, e0 in zip(bases, base)]
        drop = min(a - b for a, b in zip(errs, errs[1:]))
        return [
            _record("decreasing", i, seed, phi, drop, 0.0, errors=[float(e) for e in errs]),
            _record("terminal", i, seed, phi, terminal_tol - errs[-1], 0.0, error=float(errs[-1])),
        ]

    records = [r for rs in _map(case, range(len(family)), workers) for r in rs]
    # equality of consecutive errors is not a strict decrease
    strict = all(r["margin"] > 0 for r in records if r["check"] == "decreasing")
    res = _finish("bergman", records, {"ks": list(ks), "n_cases": n_cases, "seed": seed, "l_max": l_max},
                  "refine the quadrature or lower the potential amplitude")
    if not strict and res.passed:
        res.passed = False
        res.advice = "consecutive errors tie; the decrease is not strict"
    return res
