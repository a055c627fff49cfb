"""Model geometry of the polarized curve (P^1, O(m)).

Conventions
-----------
Points of P^1 are unit vectors in R^3; the affine coordinate is
``z = tan(theta/2) exp(i phi)`` with ``z = 0`` at the north pole.  Curvature
forms use ``dd^c = (i/2pi) d dbar`` so that ``int c_1(O(1)) = 1``.  With
``omega = m * omega_FS`` the volume is ``V = m`` and, for a potential ``phi``,

    omega_phi / omega = 1 + (Delta_S2 phi) / m,

where ``Delta_S2`` is the Laplacian of the unit round sphere (eigenvalue
``-l(l+1)`` on degree-``l`` harmonics).  Potentials are finite expansions in
real spherical harmonics orthonormal for the area form of the unit sphere.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.special import roots_jacobi, sph_harm_y

from .errors import DomainError, InputError, NumericError

FOUR_PI = 4.0 * math.pi
MAX_NODES = 10_000_000
# cap geometry for singular integration around cone points
CAP_RADIUS = 1.5
CAP_INNER_FRACTION = 0.2


# ---------------------------------------------------------------------------
# spherical harmonics


def n_harmonics(l_max: int) -> int:
    return (l_max + 1) ** 2


def harmonic_index(l: int, j: int) -> int:
    """Flat index of the real harmonic of degree ``l`` and order ``j``.

    Orders ``j > 0`` are cosine harmonics, ``j < 0`` sine harmonics.
    """
    if abs(j) > l:
        raise InputError(f"order {j} out of range for degree {l}")
    return l * l + l + j


def harmonic_degrees(l_max: int) -> np.ndarray:
    return np.concatenate([np.full(2 * l + 1, l) for l in range(l_max + 1)])


def harmonic_orders(l_max: int) -> np.ndarray:
    return np.concatenate([np.arange(-l, l + 1) for l in range(l_max + 1)])


def real_sph_harm(l_max: int, theta, phi) -> np.ndarray:
    """Real orthonormal spherical harmonics, shape ``(n_points, (l_max+1)**2)``."""
    theta = np.atleast_1d(np.asarray(theta, dtype=float)).ravel()
    phi = np.atleast_1d(np.asarray(phi, dtype=float)).ravel()
    out = np.empty((theta.size, n_harmonics(l_max)))
    sqrt2 = math.sqrt(2.0)
    for l in range(l_max + 1):
        out[:, harmonic_index(l, 0)] = sph_harm_y(l, 0, theta, phi).real
        for j in range(1, l + 1):
            y = sph_harm_y(l, j, theta, phi)
            sign = sqrt2 * (-1.0) ** j
            out[:, harmonic_index(l, j)] = sign * y.real
            out[:, harmonic_index(l, -j)] = sign * y.imag
    return out


def points_to_angles(points) -> tuple[np.ndarray, np.ndarray]:
    p = np.asarray(points, dtype=float).reshape(-1, 3)
    theta = np.arccos(np.clip(p[:, 2], -1.0, 1.0))
    phi = np.arctan2(p[:, 1], p[:, 0])
    return theta, phi


def angles_to_points(theta, phi) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    st = np.sin(theta)
    return np.stack([st * np.cos(phi), st * np.sin(phi), np.cos(theta)], axis=-1)


def stereographic(points) -> np.ndarray:
    """Affine coordinate ``z``; ``inf`` at the south pole."""
    p = np.asarray(points, dtype=float).reshape(-1, 3)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = (p[:, 0] + 1j * p[:, 1]) / (1.0 + p[:, 2])
    z[p[:, 2] <= -1.0] = np.inf
    return z


def from_stereographic(z) -> np.ndarray:
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    r2 = np.abs(z) ** 2
    return np.stack([2 * z.real / (1 + r2), 2 * z.imag / (1 + r2), (1 - r2) / (1 + r2)], axis=-1)


class _PointSet:
    """Mixin caching harmonic matrices on a fixed node set."""

    def harmonics(self, l_max: int) -> np.ndarray:
        cache = self._cache
        key = ("Y", l_max)
        if key not in cache:
            # reuse a higher-degree matrix when available
            for (tag, l), mat in list(cache.items()):
                if tag == "Y" and l > l_max:
                    cache[key] = mat[:, : n_harmonics(l_max)]
                    break
            else:
                cache[key] = real_sph_harm(l_max, self.theta, self.phi)
        return cache[key]

    def integrate(self, values) -> float:
        return float(np.dot(self.weights, values))


# ---------------------------------------------------------------------------
# model and quadrature


@dataclass(frozen=True)
class PolarizedModel:
    """The polarized curve (P^1, O(m)) with the Fubini--Study reference metric."""

    m: int = 1
    normalization: str = "int c1(O(1)) = 1"

    def __post_init__(self):
        if isinstance(self.m, bool) or int(self.m) != self.m or self.m < 1:
            raise InputError(f"degree m must be a positive integer, got {self.m!r}")
        object.__setattr__(self, "m", int(self.m))

    @property
    def V(self) -> float:
        return float(self.m)

    @property
    def n(self) -> int:
        return 1


@dataclass(frozen=True, eq=False)
class SphereQuadrature(_PointSet):
    """Gauss--Legendre (in cos theta) times uniform-azimuth product rule.

    Weights are in units of omega-area and sum to ``V``.
    """

    points: np.ndarray
    theta: np.ndarray
    phi: np.ndarray
    weights: np.ndarray
    exactness: int
    V: float
    n_polar: int
    n_azimuth: int
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def size(self) -> int:
        return self.weights.size

    @property
    def z(self) -> np.ndarray:
        return stereographic(self.points)

    def probability_weights(self) -> np.ndarray:
        return self.weights / self.V


def build_quadrature(n_polar: int, n_azimuth: int, model: PolarizedModel) -> SphereQuadrature:
    if int(n_polar) != n_polar or int(n_azimuth) != n_azimuth:
        raise InputError("quadrature sizes must be integers")
    n_polar, n_azimuth = int(n_polar), int(n_azimuth)
    if n_polar < 2 or n_azimuth < 2:
        raise InputError(f"need n_polar, n_azimuth >= 2, got ({n_polar}, {n_azimuth})")
    if n_polar * n_azimuth > MAX_NODES:
        raise InputError(f"quadrature with {n_polar * n_azimuth} nodes exceeds {MAX_NODES}")
    x, wx = leggauss(n_polar)
    theta1 = np.arccos(x)
    phi1 = 2.0 * np.pi * np.arange(n_azimuth) / n_azimuth
    theta, phi = np.meshgrid(theta1, phi1, indexing="ij")
    theta, phi = theta.ravel(), phi.ravel()
    weights = np.outer(wx, np.full(n_azimuth, 2.0 * np.pi / n_azimuth)).ravel()
    weights *= model.V / FOUR_PI
    return SphereQuadrature(
        points=angles_to_points(theta, phi),
        theta=theta,
        phi=phi,
        weights=weights,
        exactness=min(2 * n_polar - 1, n_azimuth - 1),
        V=model.V,
        n_polar=n_polar,
        n_azimuth=n_azimuth,
    )


# ---------------------------------------------------------------------------
# potentials


@dataclass(frozen=True, eq=False)
class Potential:
    """A Kaehler potential as real spherical-harmonic coefficients."""

    coefficients: np.ndarray
    l_max: int

    def __post_init__(self):
        c = np.array(self.coefficients, dtype=float).ravel()
        l_max = int(self.l_max)
        if l_max < 0 or c.size != n_harmonics(l_max):
            raise InputError(f"expected {n_harmonics(max(l_max, 0))} coefficients for l_max={l_max}, got {c.size}")
        if not np.all(np.isfinite(c)):
            raise InputError("potential coefficients must be finite")
        c.setflags(write=False)
        object.__setattr__(self, "coefficients", c)
        object.__setattr__(self, "l_max", l_max)

    @classmethod
    def zeros(cls, l_max: int = 0) -> "Potential":
        return cls(np.zeros(n_harmonics(l_max)), l_max)

    @classmethod
    def constant(cls, value: float, l_max: int = 0) -> "Potential":
        c = np.zeros(n_harmonics(l_max))
        c[0] = value * math.sqrt(FOUR_PI)
        return cls(c, l_max)

    @classmethod
    def harmonic(cls, l: int, j: int, amplitude: float = 1.0, l_max: int | None = None) -> "Potential":
        l_max = l if l_max is None else l_max
        c = np.zeros(n_harmonics(l_max))
        c[harmonic_index(l, j)] = amplitude
        return cls(c, l_max)

    def padded(self, l_max: int) -> np.ndarray:
        if l_max < self.l_max:
            raise InputError("cannot truncate a potential")
        c = np.zeros(n_harmonics(l_max))
        c[: self.coefficients.size] = self.coefficients
        return c

    def __add__(self, other):
        if isinstance(other, Potential):
            l_max = max(self.l_max, other.l_max)
            return Potential(self.padded(l_max) + other.padded(l_max), l_max)
        return self.shifted(float(other))

    __radd__ = __add__

    def __neg__(self):
        return Potential(-self.coefficients, self.l_max)

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, scalar):
        return Potential(float(scalar) * self.coefficients, self.l_max)

    __rmul__ = __mul__

    def shifted(self, kappa: float) -> "Potential":
        c = self.coefficients.copy()
        c[0] += kappa * math.sqrt(FOUR_PI)
        return Potential(c, self.l_max)

    @property
    def mean(self) -> float:
        """Average of the potential over the sphere."""
        return float(self.coefficients[0] / math.sqrt(FOUR_PI))

    def laplacian_coefficients(self) -> np.ndarray:
        deg = harmonic_degrees(self.l_max)
        return -deg * (deg + 1.0) * self.coefficients

    def _basis(self, where) -> np.ndarray:
        if isinstance(where, _PointSet):
            return where.harmonics(self.l_max)
        theta, phi = points_to_angles(where)
        return real_sph_harm(self.l_max, theta, phi)

    def values(self, where) -> np.ndarray:
        """Evaluate at the nodes of a point set or at an ``(n, 3)`` array of points."""
        return self._basis(where) @ self.coefficients

    def laplacian(self, where) -> np.ndarray:
        return self._basis(where) @ self.laplacian_coefficients()

    def sup(self, where) -> float:
        return float(np.max(self.values(where)))

    def flipped(self) -> "Potential":
        """Pull back by the rotation by pi about the x-axis."""
        deg = harmonic_degrees(self.l_max)
        order = harmonic_orders(self.l_max)
        sign = (-1.0) ** (deg + np.abs(order)) * np.where(order < 0, -1.0, 1.0)
        return Potential(sign * self.coefficients, self.l_max)

    def to_dict(self) -> dict:
        return {"l_max": self.l_max, "coefficients": self.coefficients.tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> "Potential":
        return cls(np.asarray(data["coefficients"], dtype=float), int(data["l_max"]))


_CHECK_GRIDS: dict[int, np.ndarray] = {}


def _check_harmonics(l_max: int) -> np.ndarray:
    """Harmonics on a grid four times finer than the potential's degree."""
    if l_max not in _CHECK_GRIDS:
        n = 4 * (l_max + 1)
        x, _ = leggauss(n)
        theta = np.repeat(np.arccos(x), 2 * n)
        phi = np.tile(2.0 * np.pi * (np.arange(2 * n) + 0.5) / (2 * n), n)
        _CHECK_GRIDS[l_max] = real_sph_harm(l_max, theta, phi)
    return _CHECK_GRIDS[l_max]


def _sup_laplacian(coefficients: np.ndarray, l_max: int) -> float:
    deg = harmonic_degrees(l_max)
    return float(np.max(np.abs(_check_harmonics(l_max) @ (deg * (deg + 1.0) * coefficients))))


def random_potential(
    rng: np.random.Generator,
    l_max: int,
    model: PolarizedModel,
    amplitude: float = 0.5,
    decay: float = 3.0,
) -> Potential:
    """Seeded admissible potential with ``sup |omega_phi/omega - 1| = amplitude``.

    The supremum is sampled on a grid four times finer than ``l_max``; the
    slack ``1 - amplitude`` absorbs the sampling error, so ``amplitude`` must
    lie in ``[0, 0.95]``.
    """
    if not 0.0 <= amplitude <= 0.95:
        raise InputError(f"amplitude must lie in [0, 0.95], got {amplitude}")
    if l_max < 1:
        raise InputError("random potentials need l_max >= 1")
    deg = harmonic_degrees(l_max)
    c = rng.standard_normal(n_harmonics(l_max)) / (1.0 + deg) ** decay
    c[0] = 0.0
    c[1:] *= amplitude * model.m / _sup_laplacian(c, l_max)
    c[0] = rng.standard_normal()
    return Potential(c, l_max)


def random_family(
    seed: int,
    count: int,
    l_max: int,
    model: PolarizedModel,
    amplitude: float = 0.8,
    decay: float = 3.0,
) -> list[Potential]:
    """Deterministic family whose amplitudes are spread over ``(0, amplitude]``."""
    rng = np.random.default_rng(seed)
    amps = amplitude * rng.uniform(0.05, 1.0, size=count)
    return [random_potential(rng, l_max, model, float(a), decay) for a in amps]


def omega_phi_ratio(phi: Potential, q, model: PolarizedModel) -> np.ndarray:
    """Values of ``omega_phi / omega`` at the nodes of ``q``; raises when not Kaehler."""
    u = 1.0 + phi.laplacian(q) / model.m
    worst = int(np.argmin(u))
    if not u[worst] > 0.0:
        raise DomainError(
            f"potential is not Kaehler: omega_phi/omega = {u[worst]:.6g} at node {worst} "
            f"(theta={q.theta[worst]:.6f}, phi={q.phi[worst]:.6f})"
        )
    return u


def is_admissible(phi: Potential, q, model: PolarizedModel) -> bool:
    return bool(np.min(1.0 + phi.laplacian(q) / model.m) > 0.0)


# ---------------------------------------------------------------------------
# measures


@dataclass(frozen=True, eq=False)
class MeasureNodes(_PointSet):
    """Nodes and weights for integration against ``f**power dV``.

    ``weights`` already contain the density; ``density`` holds the values of
    ``f`` itself so that quotients such as ``(omega_phi/V)/(f dV)`` are available.
    """

    points: np.ndarray
    theta: np.ndarray
    phi: np.ndarray
    weights: np.ndarray
    density: np.ndarray
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def size(self) -> int:
        return self.weights.size

    @property
    def total(self) -> float:
        return float(np.sum(self.weights))


def _smooth_step(t: np.ndarray) -> np.ndarray:
    t = np.clip(t, 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        a = np.where(t > 0, np.exp(-1.0 / np.where(t > 0, t, 1.0)), 0.0)
        b = np.where(t < 1, np.exp(-1.0 / np.where(t < 1, 1.0 - t, 1.0)), 0.0)
    return a / (a + b)


def _frame(p: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    axis = np.eye(3)[int(np.argmin(np.abs(p)))]
    e1 = np.cross(p, axis)
    e1 /= np.linalg.norm(e1)
    return e1, np.cross(p, e1)


@dataclass(frozen=True, eq=False)
class Density:
    """Probability density ``f`` relative to the normalized reference measure ``omega/V``.

    ``smooth``: ``f = exp(-psi) / Z`` with ``psi`` a potential (``None`` = uniform).
    ``conic``: ``f = prod_i |s_{p_i}|^{-2(1-b)} / Z`` with the Fubini--Study
    metric ``|s_p|^2(x) = (1 - x.p)/2`` on each O(1) factor.
    """

    kind: str
    log_weight: Potential | None = None
    points: np.ndarray | None = None
    b: float = 1.0
    normalization: float = 1.0
    cap_nodes: int = 24
    cap_azimuth: int = 48
    cap_levels: int = 0
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def is_uniform(self) -> bool:
        return self.kind == "smooth" and self.log_weight is None

    @property
    def degree(self) -> int:
        return 0 if self.points is None else len(self.points)

    def describe(self) -> dict:
        if self.kind == "conic":
            return {"kind": "conic", "points": np.asarray(self.points).tolist(), "b": self.b}
        if self.log_weight is None:
            return {"kind": "smooth", "uniform": True}
        return {"kind": "smooth", "log_weight": self.log_weight.to_dict()}

    def check_integrability(self, p: float) -> None:
        """Raise unless ``f`` lies in ``L^p(dV)``."""
        if not p >= 1.0:
            raise InputError(f"integrability exponent must be >= 1, got {p}")
        if self.kind == "conic" and not p * (1.0 - self.b) < 1.0:
            raise DomainError(f"conic density with b={self.b} is not in L^{p}: p(1-b) = {p * (1 - self.b):.6g} >= 1")

    def _unnormalized(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float).reshape(-1, 3)
        if self.kind == "smooth":
            if self.log_weight is None:
                return np.ones(len(pts))
            return np.exp(-self.log_weight.values(pts))
        return np.exp(self._log_unnormalized(pts))

    def _log_unnormalized(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float).reshape(-1, 3)
        if self.kind == "smooth":
            if self.log_weight is None:
                return np.zeros(len(pts))
            return -self.log_weight.values(pts)
        diff = pts[:, None, :] - np.asarray(self.points)[None, :, :]
        t = np.sum(diff * diff, axis=-1) / 4.0
        with np.errstate(divide="ignore"):
            return -(1.0 - self.b) * np.sum(np.log(t), axis=1)

    def values(self, points) -> np.ndarray:
        return self._unnormalized(points) / self.normalization

    def log_values(self, points) -> np.ndarray:
        return self._log_unnormalized(points) - math.log(self.normalization)

    def nodes(self, q: SphereQuadrature, power: float = 1.0) -> MeasureNodes:
        """Integration nodes for the measure ``f**power dV`` (``dV = omega/V``)."""
        key = (q.n_polar, q.n_azimuth, q.V, float(power))
        if key not in self._cache:
            if self.kind == "smooth":
                f = self.values(q.points)
                w = q.probability_weights() * f**power
                self._cache[key] = MeasureNodes(q.points, q.theta, q.phi, w, f)
            else:
                raw = _conic_nodes(self, q, power, self.cap_levels)
                raw.weights[:] /= self.normalization**power
                raw.density[:] /= self.normalization
                self._cache[key] = raw
        return self._cache[key]

    def power_integral(self, p: float, q: SphereQuadrature) -> float:
        """``int f^p dV`` after checking integrability."""
        self.check_integrability(p)
        if self.is_uniform:
            return 1.0
        return self.nodes(q, power=p).total


def _cap_rule(radius: float, alpha: float, levels: int, n_s: int):
    """Nodes/weights in the cap radius ``s`` for integrands ``s**alpha * smooth``.

    Returns nodes ``s`` and weights ``w`` such that
    ``sum w * g(s) ~ int_0^radius g(s) ds`` where ``g = s**alpha * smooth``.
    """
    edges = radius * 2.0 ** -np.arange(levels, -1, -1.0)
    xj, wj = roots_jacobi(n_s, 0.0, alpha)
    a = edges[0]
    s_in = a * (1.0 + xj) / 2.0
    w_in = (a / 2.0) ** (alpha + 1.0) * wj / s_in**alpha
    xg, wg = leggauss(n_s)
    lo, hi = edges[:-1, None], edges[1:, None]
    s_out = (lo + (hi - lo) * (1.0 + xg) / 2.0).ravel()
    w_out = ((hi - lo) / 2.0 * wg).ravel()
    return np.concatenate([s_in, s_out]), np.concatenate([w_in, w_out])


def _conic_nodes(density: Density, q: SphereQuadrature, power: float, levels: int) -> MeasureNodes:
    cone = np.asarray(density.points)
    beta = 2.0 * (1.0 - density.b) * power
    alpha = 1.0 - beta
    if alpha <= -1.0:
        raise DomainError(f"f^{power} is not integrable near the cone points")
    radius = _cap_radius(cone)
    inner = CAP_INNER_FRACTION * radius

    def chi(s):
        return 1.0 - _smooth_step((s - inner) / (radius - inner))

    # global grid carries (1 - sum chi) of the mass
    ang = np.arccos(np.clip(q.points @ cone.T, -1.0, 1.0))
    outside = 1.0 - np.sum(chi(ang), axis=1)
    keep = outside > 0.0
    glob_pts = q.points[keep]
    f_glob = np.exp(density._log_unnormalized(glob_pts))
    w_glob = q.probability_weights()[keep] * outside[keep] * f_glob**power

    s, ws = _cap_rule(radius, alpha, levels, density.cap_nodes)
    n_az = density.cap_azimuth
    az = 2.0 * np.pi * (np.arange(n_az) + 0.5) / n_az
    S, A = np.meshgrid(s, az, indexing="ij")
    WS = np.broadcast_to(ws[:, None], S.shape)
    pts, wts, fvals = [glob_pts], [w_glob], [f_glob]
    for p in cone:
        e1, e2 = _frame(p)
        x = (
            np.cos(S)[..., None] * p
            + np.sin(S)[..., None] * (np.cos(A)[..., None] * e1 + np.sin(A)[..., None] * e2)
        ).reshape(-1, 3)
        x /= np.linalg.norm(x, axis=1, keepdims=True)
        f_cap = np.exp(density._log_unnormalized(x))
        w = (WS * np.sin(S) * chi(S)).ravel() * (2.0 * np.pi / n_az) / FOUR_PI * f_cap**power
        pts.append(x)
        wts.append(w)
        fvals.append(f_cap)
    points = np.concatenate(pts)
    theta, phi = points_to_angles(points)
    return MeasureNodes(points, theta, phi, np.concatenate(wts), np.concatenate(fvals))


def _cap_radius(cone: np.ndarray) -> float:
    radius = CAP_RADIUS
    if len(cone) > 1:
        gram = np.clip(cone @ cone.T, -1.0, 1.0)
        iu = np.triu_indices(len(cone), 1)
        radius = min(radius, 0.45 * float(np.min(np.arccos(gram[iu]))))
    return radius


_UNIFORM = Density(kind="smooth")


def uniform_density() -> Density:
    """The reference measure ``omega/V`` itself (shared instance, caches nodes)."""
    return _UNIFORM


def smooth_density(log_weight: Potential, q: SphereQuadrature) -> Density:
    """Normalized smooth density ``exp(-log_weight) / Z``."""
    z = float(np.dot(q.probability_weights(), np.exp(-log_weight.values(q))))
    return Density(kind="smooth", log_weight=log_weight, normalization=z)


def _as_points(points) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts.reshape(1, -1)
    if pts.ndim != 2 or pts.shape[1] != 3 or len(pts) == 0:
        raise InputError("cone points must be a nonempty list of 3-vectors")
    norms = np.linalg.norm(pts, axis=1)
    if np.any(norms == 0):
        raise InputError("cone points must be nonzero vectors")
    return pts / norms[:, None]


def conic_density(
    points: Sequence,
    b: float,
    q: SphereQuadrature,
    rtol: float = 1e-10,
    max_levels: int = 64,
) -> Density:
    """Normalized conic density ``prod_i |s_{p_i}|^{-2(1-b)}``.

    The normalization integral is refined dyadically towards each cone point
    until successive estimates agree to ``rtol``.
    """
    b = float(b)
    if not 0.0 < b <= 1.0:
        raise InputError(f"cone parameter b must lie in (0, 1], got {b}")
    pts = _as_points(points)
    gram = pts @ pts.T
    iu = np.triu_indices(len(pts), 1)
    if np.any(gram[iu] > 1.0 - 1e-12):
        raise InputError("cone points must be distinct")
    if b == 1.0:
        return uniform_density()
    probe = Density(kind="conic", points=pts, b=b)
    prev = None
    for levels in range(8, max_levels + 1, 4):
        total = _conic_nodes(probe, q, 1.0, levels).total
        if prev is not None and abs(total - prev) <= rtol * abs(total):
            pts.setflags(write=False)
            return Density(kind="conic", points=pts, b=b, normalization=total, cap_levels=levels)
        prev = total
    raise NumericError(f"normalization of the conic density did not converge (last {prev})")


def plain_grid_normalization(points, b: float, q: SphereQuadrature) -> float:
    """Unrefined product-rule estimate of ``int prod |s_p|^{-2(1-b)} dV``."""
    probe = Density(kind="conic", points=_as_points(points), b=float(b))
    return float(np.dot(q.probability_weights(), probe._unnormalized(q.points)))


# ---------------------------------------------------------------------------
# (1,1)-forms


@dataclass(frozen=True, eq=False)
class OneOneForm:
    """A closed (1,1)-form ``chi = g * omega`` with ``g = constant + Delta_S2(psi)/m``.

    Every smooth closed real (1,1)-form on P^1 has this shape; the exact part
    is carried by the potential ``psi`` so that the cohomological mass is
    ``constant * V``.
    """

    m: int
    constant: float = 0.0
    potential: Potential | None = None

    @property
    def mass(self) -> float:
        return self.constant * self.m

    @property
    def average(self) -> float:
        """``n int chi ^ omega^{n-1} / int omega^n``."""
        return self.constant

    def values(self, where) -> np.ndarray:
        if isinstance(where, _PointSet):
            n = where.points.shape[0]
        else:
            n = np.asarray(where).reshape(-1, 3).shape[0]
        g = np.full(n, float(self.constant))
        if self.potential is not None:
            g = g + self.potential.laplacian(where) / self.m
        return g

    def _check(self, other: "OneOneForm"):
        if other.m != self.m:
            raise InputError("forms live on different models")

    def __add__(self, other: "OneOneForm") -> "OneOneForm":
        self._check(other)
        if self.potential is None:
            pot = other.potential
        elif other.potential is None:
            pot = self.potential
        else:
            pot = self.potential + other.potential
        return OneOneForm(self.m, self.constant + other.constant, pot)

    def __mul__(self, scalar: float) -> "OneOneForm":
        pot = None if self.potential is None else self.potential * scalar
        return OneOneForm(self.m, float(scalar) * self.constant, pot)

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    def __sub__(self, other):
        return self + (-other)


def omega_form(model: PolarizedModel) -> OneOneForm:
    return OneOneForm(model.m, 1.0)


def zero_form(model: PolarizedModel) -> OneOneForm:
    return OneOneForm(model.m, 0.0)


def ricci_density(dV: Density, q: SphereQuadrature | None, model: PolarizedModel) -> OneOneForm:
    """``Ric dV = -dd^c log(density of dV)`` for a smooth volume form.

    For ``dV = exp(-psi) omega_FS / Z`` this is ``2 omega_FS + dd^c psi``.
    """
    if dV.kind != "smooth":
        raise DomainError("Ricci form of a conic measure is not defined here")
    return OneOneForm(model.m, 2.0 / model.m, dV.log_weight)


def eta_form(points, b: float, model: PolarizedModel) -> OneOneForm:
    """``(1-b)`` times the curvature of the Fubini--Study metric on O(D)."""
    b = float(b)
    if not 0.0 < b <= 1.0:
        raise InputError(f"cone parameter b must lie in (0, 1], got {b}")
    pts = _as_points(points)
    return OneOneForm(model.m, (1.0 - b) * len(pts) / model.m)
