"""Energy functionals on Kaehler potentials of (P^1, O(m)).

For n = 1 the Monge--Ampere measure is ``omega_phi = u * omega`` with
``u = 1 + Delta_S2(phi)/m`` and all functionals reduce to three pairings

    I0 = int phi omega,   I1 = int phi omega_phi,   I_chi = int phi chi,

evaluated on a product quadrature.  Spectral (Parseval) versions of the
pairings are exposed for identity checks that must not share a code path
with the quadrature.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import DomainError, InputError
from .geometry import (
    FOUR_PI,
    Density,
    OneOneForm,
    PolarizedModel,
    Potential,
    SphereQuadrature,
    harmonic_degrees,
    omega_form,
    omega_phi_ratio,
    ricci_density,
    uniform_density,
    zero_form,
)

IDENTITY_TOL = 1e-9
INEQUALITY_TOL = 1e-6
SINGULAR_TOL = 1e-4


def log_integral_exp(values: np.ndarray, weights: np.ndarray) -> float:
    """``log sum(weights * exp(values))`` with a max shift."""
    values = np.asarray(values, dtype=float)
    top = float(np.max(values))
    return top + math.log(float(np.dot(weights, np.exp(values - top))))


def _pairings(phi: Potential, q: SphereQuadrature, model: PolarizedModel):
    u = omega_phi_ratio(phi, q, model)
    p = phi.values(q)
    return p, u, q.integrate(p), q.integrate(p * u)


def energy_E(phi: Potential, q: SphereQuadrature, model: PolarizedModel) -> float:
    """Aubin--Mabuchi energy ``(1/2V) int phi (omega + omega_phi)``."""
    _, _, i0, i1 = _pairings(phi, q, model)
    return (i0 + i1) / (2.0 * model.V)


def j_functional(phi: Potential, q: SphereQuadrature, model: PolarizedModel) -> float:
    _, _, i0, i1 = _pairings(phi, q, model)
    return i0 / model.V - (i0 + i1) / (2.0 * model.V)


def j_chi(phi: Potential, chi: OneOneForm, q: SphereQuadrature, model: PolarizedModel) -> float:
    """``(1/V) int phi chi - (chi_bar / 2V) int phi (omega + omega_phi)``."""
    if chi.m != model.m:
        raise InputError("form and model disagree on m")
    p, _, i0, i1 = _pairings(phi, q, model)
    i_chi = q.integrate(p * chi.values(q))
    return i_chi / model.V - chi.average * (i0 + i1) / (2.0 * model.V)


# -- spectral pairings ------------------------------------------------------


def _spectral_pairings(phi: Potential, model: PolarizedModel) -> tuple[float, float]:
    c = phi.coefficients
    scale = model.V / FOUR_PI
    i0 = scale * c[0] * math.sqrt(FOUR_PI)
    i1 = i0 + scale * float(np.dot(c, phi.laplacian_coefficients())) / model.m
    return i0, i1


def energy_E_spectral(phi: Potential, model: PolarizedModel) -> float:
    i0, i1 = _spectral_pairings(phi, model)
    return (i0 + i1) / (2.0 * model.V)


def mean_against_omega_phi_spectral(phi: Potential, model: PolarizedModel) -> float:
    """``(1/V) int phi omega_phi`` by Parseval."""
    return _spectral_pairings(phi, model)[1] / model.V


def j_functional_spectral(phi: Potential, model: PolarizedModel) -> float:
    deg = harmonic_degrees(phi.l_max)
    c = phi.coefficients
    return float(np.sum(deg * (deg + 1.0) * c * c)) / (2.0 * model.m * FOUR_PI)


# -- measures ----------------------------------------------------------------


def _reference(f: Density | None, dV: Density | None, q: SphereQuadrature):
    """Nodes, probability weights and density of ``dV_f = f dV`` w.r.t. ``omega/V``."""
    f = uniform_density() if f is None else f
    nodes = f.nodes(q)
    weights, dens = nodes.weights, nodes.density
    if dV is not None and not dV.is_uniform:
        if dV.kind != "smooth":
            raise DomainError("the reference volume form dV must be smooth")
        g = dV.values(nodes.points)
        weights, dens = weights * g, dens * g
    return nodes, weights, dens


def entropy(
    phi: Potential,
    f: Density | None,
    q: SphereQuadrature,
    model: PolarizedModel,
    dV: Density | None = None,
) -> float:
    """Relative entropy of ``V^{-1} omega_phi`` with respect to ``f dV``."""
    nodes, w, dens = _reference(f, dV, q)
    total = float(np.sum(w))
    if abs(total - 1.0) > 1e-6:
        raise InputError(f"f dV is not a probability measure (mass {total:.12g})")
    u = omega_phi_ratio(phi, nodes, model)
    rho = u / dens
    return float(np.dot(w, rho * np.log(rho)))


def legendre_value(
    phi: Potential,
    a_values: np.ndarray,
    f: Density | None,
    q: SphereQuadrature,
    model: PolarizedModel,
    dV: Density | None = None,
) -> float:
    """``int a dnu - log int e^a dmu`` for ``nu = V^{-1} omega_phi``, ``mu = f dV``.

    ``a_values`` are the values of ``a`` on ``f.nodes(q)``.
    """
    nodes, w, dens = _reference(f, dV, q)
    u = omega_phi_ratio(phi, nodes, model)
    a = np.asarray(a_values, dtype=float)
    return float(np.dot(w, a * u / dens)) - log_integral_exp(a, w)


def legendre_optimizer(phi: Potential, f: Density | None, q: SphereQuadrature, model: PolarizedModel, dV=None):
    """Values of ``log(nu/mu)`` on the nodes used by :func:`legendre_value`."""
    nodes, _, dens = _reference(f, dV, q)
    return np.log(omega_phi_ratio(phi, nodes, model) / dens)


def reference_nodes(f: Density | None, q: SphereQuadrature):
    return (uniform_density() if f is None else f).nodes(q)


def ding(
    phi: Potential,
    gamma: float,
    f: Density | None,
    q: SphereQuadrature,
    model: PolarizedModel,
    dV: Density | None = None,
) -> float:
    """Twisted Ding functional ``-E(phi) - (1/gamma) log int e^{-gamma phi} f dV``."""
    return -energy_E(phi, q, model) - log_laplace(phi, gamma, f, q, dV) / gamma


def log_laplace(phi: Potential, gamma: float, f: Density | None, q: SphereQuadrature, dV=None) -> float:
    """``log int exp(-gamma phi) f dV``."""
    if not gamma > 0:
        raise InputError(f"gamma must be positive, got {gamma}")
    nodes, w, _ = _reference(f, dV, q)
    return log_integral_exp(-gamma * phi.values(nodes), w)


def twisting_form(eta: OneOneForm | None, model: PolarizedModel, dV: Density | None = None) -> OneOneForm:
    """``-Ric dV + eta``."""
    ric = ricci_density(uniform_density() if dV is None else dV, None, model)
    return -ric + (zero_form(model) if eta is None else eta)


def mabuchi_parts(phi, f, eta, q, model, dV=None) -> tuple[float, float]:
    """``(Ent, J_{-Ric dV + eta})``; the Mabuchi energy is their sum."""
    ent = entropy(phi, f, q, model, dV)
    return ent, j_chi(phi, twisting_form(eta, model, dV), q, model)


def mabuchi_energy(
    phi: Potential,
    f: Density | None,
    eta: OneOneForm | None,
    q: SphereQuadrature,
    model: PolarizedModel,
    dV: Density | None = None,
) -> float:
    ent, jt = mabuchi_parts(phi, f, eta, q, model, dV)
    return ent + jt


def verify_mabuchi_ding(phi, gamma, f, eta, q, model, dV=None) -> float:
    """Signed margin ``M - gamma D - J_{-Ric dV + eta + gamma omega}`` (nonnegative)."""
    m_val = mabuchi_energy(phi, f, eta, q, model, dV)
    d_val = ding(phi, gamma, f, q, model, dV)
    chi = twisting_form(eta, model, dV) + gamma * omega_form(model)
    return m_val - gamma * d_val - j_chi(phi, chi, q, model)


# -- reports -----------------------------------------------------------------


@dataclass
class FunctionalReport:
    E: float
    J: float
    J_chi: dict
    Ent: float
    J_twist: float
    M: float
    D: float
    gamma: float
    tau: float
    tolerances: dict = field(
        default_factory=lambda: {"identity": IDENTITY_TOL, "inequality": INEQUALITY_TOL, "singular": SINGULAR_TOL}
    )

    def __post_init__(self):
        if self.J < -1e-8:
            raise DomainError(f"J = {self.J} is negative beyond quadrature precision")

    @property
    def mabuchi(self) -> float:
        return self.Ent + self.J_twist

    def to_dict(self) -> dict:
        return asdict(self)


def functional_report(
    phi: Potential,
    gamma: float,
    tau: float,
    f: Density | None,
    eta: OneOneForm | None,
    q: SphereQuadrature,
    model: PolarizedModel,
    chis: dict | None = None,
    dV: Density | None = None,
) -> FunctionalReport:
    if not (gamma > 0 and tau > 0):
        raise InputError("gamma and tau must be positive")
    ent, jt = mabuchi_parts(phi, f, eta, q, model, dV)
    chis = {"omega": omega_form(model)} if chis is None else chis
    return FunctionalReport(
        E=energy_E(phi, q, model),
        J=j_functional(phi, q, model),
        J_chi={name: j_chi(phi, chi, q, model) for name, chi in chis.items()},
        Ent=ent,
        J_twist=jt,
        M=ent + jt,
        D=ding(phi, gamma, f, q, model, dV),
        gamma=float(gamma),
        tau=float(tau),
    )


# -- constant fitting --------------------------------------------------------


@dataclass
class ConstantsFit:
    """Fitted stand-ins for the existential constants.

    Raw maxima over the generating family are kept alongside the reported
    values, which carry a relative ``safety`` allowance for held-out checks.
    """

    A: float | None
    B: float
    C: float
    C0: float
    C1: float
    c: float
    family: dict
    raw: dict = field(default_factory=dict)
    safety: float = 0.0

    def to_dict(self) -> dict:
        return asdict(self)


def smallest_ricci_compensation(q: SphereQuadrature, model: PolarizedModel, dV: Density | None = None) -> float:
    """Smallest ``c >= 0`` with ``c omega + Ric dV >= 0`` on the quadrature nodes."""
    g_ric = ricci_density(uniform_density() if dV is None else dV, q, model).values(q)
    return max(0.0, -float(np.min(g_ric)))


def _energy_gap_ratio(phi, k, c, q, model, dV) -> float | None:
    from .quantization import energy_Ek, section_basis

    eps = c / k
    if eps >= 1.0:
        return None
    denom = -energy_E(phi, q, model) + phi.sup(q)
    if denom <= 1e-12:
        return None
    basis = section_basis(model.m, k)
    lhs = -energy_Ek((1.0 - eps) * phi, basis, q, model, dV) / (1.0 - eps)
    return k * (lhs + energy_E(phi, q, model)) / denom


def _ding_gap_ratio(phi, k, c, gamma, f, q, model, dV) -> float:
    from .quantization import approx_ding, section_basis

    eps = c / k
    g_eps = (1.0 - eps) * gamma
    lhs = gamma * approx_ding(phi, gamma, f, section_basis(model.m, k), q, model, dV)
    base = g_eps * ding(phi, g_eps, f, q, model, dV)
    weight = g_eps * (j_chi(phi, omega_form(model), q, model) / k + 1.0)
    return (lhs - base) / weight


def fit_constants(
    family: list,
    q: SphereQuadrature,
    model: PolarizedModel,
    ks=(2, 3, 4),
    gamma: float = 0.5,
    f: Density | None = None,
    dV: Density | None = None,
    B_grid=(1e-3, 1e-2, 1e-1, 1.0),
    safety: float = 0.1,
) -> ConstantsFit:
    """Fit A, B, C, C0, C1 and c over a family of admissible potentials."""
    if not family:
        raise InputError("cannot fit constants on an empty family")
    J = np.array([j_functional(p, q, model) for p in family])
    Jw = np.array([j_chi(p, omega_form(model), q, model) for p in family])
    gap = np.array([p.sup(q) - energy_E(p, q, model) - j for p, j in zip(family, J)])
    c = smallest_ricci_compensation(q, model, dV)

    A = None
    B = float(B_grid[-1])
    live = J > 1e-12
    if np.any(live):
        for b_val in B_grid:
            a_val = float(np.min((Jw[live] + b_val) / J[live]))
            if a_val > 0:
                A, B = a_val, float(b_val)
                break
    C = max(0.0, float(np.max(gap)))

    r0 = [_energy_gap_ratio(p, k, c, q, model, dV) for k in ks for p in family]
    r0 = [r for r in r0 if r is not None]
    C0 = max([0.0] + r0)
    r1 = [_ding_gap_ratio(p, k, c, gamma, f, q, model, dV) for k in ks for p in family]
    C1 = max([0.0] + r1)

    grow = 1.0 + safety
    return ConstantsFit(
        A=None if A is None else A / grow,
        B=B,
        C=C * grow,
        C0=C0 * grow,
        C1=C1 * grow,
        c=c,
        family={"size": len(family), "l_max": max(p.l_max for p in family), "ks": list(ks), "gamma": gamma},
        raw={"A": A, "C": C, "C0": C0, "C1": C1},
        safety=safety,
    )


def constants_margins(
    fit: ConstantsFit,
    family: list,
    q: SphereQuadrature,
    model: PolarizedModel,
    f: Density | None = None,
    dV: Density | None = None,
) -> dict:
    """Worst signed margins of each fitted inequality over ``family``."""
    ks = fit.family["ks"]
    gamma = fit.family["gamma"]
    out = {"j_omega_lower": math.inf, "sup_bound": math.inf, "energy_gap": math.inf, "ding_gap": math.inf}
    for p in family:
        J = j_functional(p, q, model)
        Jw = j_chi(p, omega_form(model), q, model)
        if fit.A is not None:
            out["j_omega_lower"] = min(out["j_omega_lower"], Jw - fit.A * J + fit.B)
        out["sup_bound"] = min(out["sup_bound"], J + fit.C - (p.sup(q) - energy_E(p, q, model)))
        for k in ks:
            r = _energy_gap_ratio(p, k, fit.c, q, model, dV)
            if r is not None:
                denom = -energy_E(p, q, model) + p.sup(q)
                out["energy_gap"] = min(out["energy_gap"], (fit.C0 - r) * denom / k)
            r1 = _ding_gap_ratio(p, k, fit.c, gamma, f, q, model, dV)
            out["ding_gap"] = min(out["ding_gap"], fit.C1 - r1)
    return out


# -- coercivity --------------------------------------------------------------


@dataclass
class CoercivityReport:
    functional: str
    slope: float
    intercept: float
    n: int
    J_range: tuple

    def to_dict(self) -> dict:
        return asdict(self)


def lower_envelope_fit(x, y) -> tuple[float, float]:
    """Line of the lower convex hull of ``(x, y)`` supporting it at ``mean(x)``.

    Among lines lying below every point this maximizes the summed height.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size < 2 or float(np.ptp(x)) <= 1e-12:
        raise DomainError("degenerate J range: need at least two distinct J values")
    order = np.lexsort((y, x))
    hull: list[tuple[float, float]] = []
    for i in order:
        pt = (x[i], y[i])
        if hull and hull[-1][0] == pt[0]:
            continue
        while len(hull) >= 2:
            (x1, y1), (x2, y2) = hull[-2], hull[-1]
            if (x2 - x1) * (pt[1] - y1) - (y2 - y1) * (pt[0] - x1) <= 0:
                hull.pop()
            else:
                break
        hull.append(pt)
    xbar = float(np.mean(x))
    for (x1, y1), (x2, y2) in zip(hull[:-1], hull[1:]):
        if x1 <= xbar <= x2:
            slope = (y2 - y1) / (x2 - x1)
            return float(slope), float(y1 - slope * x1)
    (x1, y1), (x2, y2) = hull[-2], hull[-1]
    slope = (y2 - y1) / (x2 - x1)
    return float(slope), float(y1 - slope * x1)


COERCIVITY_TAGS = ("J", "J_omega", "mabuchi", "ding", "J_twist")


def evaluate_tag(tag: str, phi, q, model, f=None, eta=None, gamma: float = 0.5, dV=None) -> float:
    if tag == "J":
        return j_functional(phi, q, model)
    if tag == "J_omega":
        return j_chi(phi, omega_form(model), q, model)
    if tag == "mabuchi":
        return mabuchi_energy(phi, f, eta, q, model, dV)
    if tag == "ding":
        return gamma * ding(phi, gamma, f, q, model, dV)
    if tag == "J_twist":
        return j_chi(phi, twisting_form(eta, model, dV) + gamma * omega_form(model), q, model)
    raise InputError(f"unknown functional tag {tag!r}; choose from {COERCIVITY_TAGS}")


def coercivity_probe(tag: str, family: list, q, model, f=None, eta=None, gamma: float = 0.5, dV=None) -> CoercivityReport:
    """Lower-envelope regression of a functional against J (a diagnostic only)."""
    J = np.array([j_functional(p, q, model) for p in family])
    F = np.array([evaluate_tag(tag, p, q, model, f, eta, gamma, dV) for p in family])
    slope, intercept = lower_envelope_fit(J, F)
    return CoercivityReport(tag, slope, intercept, len(family), (float(J.min()), float(J.max())))
