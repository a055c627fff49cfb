"""Quantized objects at level k: section bases, Gram matrices, E_k, Slater determinants.

Sections of O(mk) are homogeneous polynomials of degree ``d = mk`` in
``(zeta0, zeta1)``.  With unit homogeneous coordinates the Fubini--Study norm
is the modulus, so ``|zeta0^(d-j) zeta1^j|^2 = |z|^(2j) / (1 + |z|^2)^d``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from .errors import InputError, NumericError
from .functionals import log_laplace
from .geometry import Density, PolarizedModel, Potential, SphereQuadrature, uniform_density
from .streams import check_seed, map_chunks, uniform_sphere

MAX_DEGREE = 4096


def homogeneous(points, gauge: str = "auto") -> tuple[np.ndarray, np.ndarray]:
    """Unit homogeneous coordinates ``(zeta0, zeta1)`` with ``z = zeta1/zeta0``.

    ``gauge`` picks the chart: ``north`` makes ``zeta0`` real, ``south`` makes
    ``zeta1`` real, ``auto`` uses whichever is better conditioned.
    """
    p = np.asarray(points, dtype=float)
    x1, x2, x3 = p[..., 0], p[..., 1], p[..., 2]
    w = x1 + 1j * x2
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.sqrt((1.0 + x3) / 2.0)
        n0, n1 = r + 0j, w / (2.0 * r)
        s = np.sqrt((1.0 - x3) / 2.0)
        s0, s1 = np.conj(w) / (2.0 * s), s + 0j
    if gauge == "north":
        return n0, n1
    if gauge == "south":
        return s0, s1
    if gauge != "auto":
        raise InputError(f"unknown gauge {gauge!r}")
    north = x3 >= 0
    return np.where(north, n0, s0), np.where(north, n1, s1)


@dataclass(frozen=True, eq=False)
class SectionBasis:
    """Basis of H^0(P^1, O(mk)); monomials unless ``change`` is given.

    With ``change = A`` the basis is ``s'_i = sum_j A_ij z^j``.
    """

    m: int
    k: int
    change: np.ndarray | None = None

    def __post_init__(self):
        for name in ("m", "k"):
            v = getattr(self, name)
            if isinstance(v, bool) or int(v) != v or v < 1:
                raise InputError(f"{name} must be a positive integer, got {v!r}")
        if self.m * self.k > MAX_DEGREE:
            raise InputError(f"degree mk = {self.m * self.k} exceeds {MAX_DEGREE}")
        if self.change is not None:
            A = np.array(self.change, dtype=complex)
            if A.shape != (self.N, self.N):
                raise InputError(f"basis change must be {self.N}x{self.N}")
            A.setflags(write=False)
            object.__setattr__(self, "change", A)

    @property
    def degree(self) -> int:
        return self.m * self.k

    @property
    def N(self) -> int:
        return self.m * self.k + 1

    def with_change(self, A) -> "SectionBasis":
        A = np.asarray(A, dtype=complex)
        if self.change is not None:
            A = A @ self.change
        return SectionBasis(self.m, self.k, A)

    def monomials(self, points, gauge: str = "auto") -> np.ndarray:
        z0, z1 = homogeneous(points, gauge)
        j = np.arange(self.N)
        return z0[..., None] ** (self.degree - j) * z1[..., None] ** j

    def evaluate(self, points, gauge: str = "auto") -> np.ndarray:
        """Values ``s_i(x)`` in a unitary frame of the Fubini--Study metric, shape ``(..., N)``."""
        s = self.monomials(points, gauge)
        if self.change is not None:
            s = s @ self.change.T
        return s

    def pointwise_norms(self, points, phi: Potential | None = None) -> np.ndarray:
        """``|s_i|^2_{(h e^{-phi})^k}`` at each point."""
        s = np.abs(self.evaluate(points)) ** 2
        if phi is not None:
            s = s * np.exp(-self.k * phi.values(np.asarray(points).reshape(-1, 3))).reshape(s.shape[:-1])[..., None]
        return s

    def log_slater(self, configs, method: str = "auto") -> np.ndarray:
        """``log |det S|^2_{h^k}`` for configurations of shape ``(..., N, 3)``.

        The monomial basis uses the Vandermonde factorization
        ``|det S|^2 = prod_{i<j} |x_i - x_j|^2 / 4``; other bases (or
        ``method='matrix'``) take the log-determinant of the evaluation matrix.
        """
        x = np.asarray(configs, dtype=float)
        if x.shape[-2:] != (self.N, 3):
            raise InputError(f"configurations must have shape (..., {self.N}, 3), got {x.shape}")
        if method == "auto":
            method = "vandermonde" if self.change is None else "matrix"
        if method == "vandermonde":
            if self.change is not None:
                raise InputError("the Vandermonde path needs the monomial basis")
            out = np.zeros(x.shape[:-2])
            with np.errstate(divide="ignore"):
                for i, j in itertools.combinations(range(self.N), 2):
                    d = x[..., i, :] - x[..., j, :]
                    out = out + np.log(np.sum(d * d, axis=-1) / 4.0)
            return out
        if method != "matrix":
            raise InputError(f"unknown method {method!r}")
        S = self.evaluate(x)
        sign, logabs = np.linalg.slogdet(S)
        out = np.where(sign == 0, -np.inf, 2.0 * logabs)
        return _mark_collisions(x, out)


def _mark_collisions(x: np.ndarray, out: np.ndarray) -> np.ndarray:
    n = x.shape[-2]
    for i, j in itertools.combinations(range(n), 2):
        same = np.all(x[..., i, :] == x[..., j, :], axis=-1)
        out = np.where(same, -np.inf, out)
    return out


def section_basis(m: int, k: int) -> SectionBasis:
    return SectionBasis(m, k)


# ---------------------------------------------------------------------------
# Gram matrices


@dataclass(frozen=True, eq=False)
class GramMatrix:
    """``H_ij = int (s_i, s_j)_{(h e^{-phi})^k} mu``, Hermitian positive definite."""

    entries: np.ndarray
    k: int
    m: int
    potential: dict = field(default_factory=dict)
    measure: dict = field(default_factory=dict)

    @property
    def N(self) -> int:
        return self.entries.shape[0]

    def cholesky(self) -> np.ndarray:
        try:
            L = np.linalg.cholesky(self.entries)
        except np.linalg.LinAlgError as exc:
            raise NumericError("Gram matrix is not positive definite; refine the quadrature") from exc
        piv = np.diag(L).real ** 2
        if piv.min() <= 1e-15 * piv.max():
            raise NumericError(
                f"Gram matrix pivot ratio {piv.min() / piv.max():.3g} below threshold; refine the quadrature"
            )
        return L

    def logdet(self) -> float:
        return float(2.0 * np.sum(np.log(np.diag(self.cholesky()).real)))

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.entries)

    def to_dict(self) -> dict:
        H = self.entries
        return {
            "k": self.k,
            "m": self.m,
            "N": self.N,
            "entries": [[[float(H[i, j].real), float(H[i, j].imag)] for j in range(self.N)] for i in range(self.N)],
            "potential": self.potential,
            "measure": self.measure,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "GramMatrix":
        H = np.array([[complex(re, im) for re, im in row] for row in data["entries"]])
        return cls(H, int(data["k"]), int(data["m"]), data.get("potential", {}), data.get("measure", {}))


def gram_matrix(
    phi: Potential,
    mu: Density | None,
    basis: SectionBasis,
    q: SphereQuadrature,
    hermitian_tol: float = 1e-12,
) -> GramMatrix:
    mu = uniform_density() if mu is None else mu
    nodes = mu.nodes(q)
    S = basis.evaluate(nodes.points)
    w = nodes.weights * np.exp(-basis.k * phi.values(nodes))
    H = (S.T * w) @ S.conj()
    skew = np.max(np.abs(H - H.conj().T))
    if skew > hermitian_tol * np.max(np.abs(H)):
        raise NumericError(f"Gram matrix fails the Hermitian check by {skew:.3g}")
    H = 0.5 * (H + H.conj().T)
    gm = GramMatrix(H, basis.k, basis.m, phi.to_dict(), mu.describe())
    gm.cholesky()
    return gm


def energy_Ek(
    phi: Potential,
    basis: SectionBasis,
    q: SphereQuadrature,
    model: PolarizedModel,
    dV: Density | None = None,
) -> float:
    """``-(1/kN) log det H^(k)(phi, dV)``."""
    if basis.m != model.m:
        raise InputError("basis and model disagree on m")
    H = gram_matrix(phi, dV, basis, q)
    return -H.logdet() / (basis.k * basis.N)


def approx_ding(
    phi: Potential,
    gamma: float,
    f: Density | None,
    basis: SectionBasis,
    q: SphereQuadrature,
    model: PolarizedModel,
    dV: Density | None = None,
) -> float:
    """``-E_k(phi) - (1/gamma) log int e^{-gamma phi} f dV``; ``E_k`` always uses ``dV``."""
    return -energy_Ek(phi, basis, q, model, dV) - log_laplace(phi, gamma, f, q, dV) / gamma


def slater_det(points, phi: Potential | None, basis: SectionBasis, method: str = "auto") -> float:
    """``log |det S^(k)|^2_{(h e^{-phi})^k}`` at one configuration (``-inf`` on collisions)."""
    x = np.asarray(points, dtype=float).reshape(basis.N, 3)
    val = float(basis.log_slater(x, method))
    if phi is not None and np.isfinite(val):
        val -= basis.k * float(np.sum(phi.values(x)))
    return val


# ---------------------------------------------------------------------------
# determinant identity


@dataclass
class GramIdentityCheck:
    lhs: float
    rhs: float
    rel_error: float
    stderr: float
    mode: str
    n_samples: int = 0


def log_factorial(n: int) -> float:
    return float(gammaln(n + 1.0))


def _tensor_lhs(basis: SectionBasis, phi: Potential | None, q: SphereQuadrature) -> float:
    w = q.probability_weights()
    if phi is not None:
        w = w * np.exp(-basis.k * phi.values(q))
    x = q.points
    N = basis.N
    if basis.change is None and N <= 4:
        diff = x[:, None, :] - x[None, :, :]
        D = np.sum(diff * diff, axis=-1) / 4.0
        if N == 1:
            return float(np.sum(w))
        if N == 2:
            return float(w @ D @ w)
        if N == 3:
            Vm = D * w[None, :]
            return float(np.sum(w * np.sum((Vm @ D) * Vm, axis=1)))
        total = 0.0
        for a in range(len(w)):
            v = w * D[a]
            Vm = D * v[None, :]
            total += w[a] * float(np.sum(v * np.sum((Vm @ D) * Vm, axis=1)))
        return total
    # generic: enumerate index tuples with the last coordinate vectorized
    M = len(w)
    S = basis.evaluate(x)
    total = 0.0
    for head in itertools.product(range(M), repeat=N - 1):
        cols = np.broadcast_to(S[list(head)], (M, N - 1, N))
        mats = np.concatenate([cols, S[:, None, :]], axis=1)
        det = np.linalg.det(mats)
        total += float(np.prod(w[list(head)]) * np.sum(w * np.abs(det) ** 2))
    return total


def gram_identity_check(
    phi: Potential | None,
    basis: SectionBasis,
    q: SphereQuadrature,
    mode: str = "tensor",
    n_samples: int = 1_000_000,
    seed: int = 0,
) -> GramIdentityCheck:
    """Compare ``||det S||^2_{L^2(dV^N)}`` with ``N! det H^(k)(phi, dV)``."""
    phi0 = Potential.zeros() if phi is None else phi
    rhs = math.exp(log_factorial(basis.N) + gram_matrix(phi0, None, basis, q).logdet())
    if mode == "tensor":
        if basis.N > 4:
            raise InputError(f"tensor mode supports N <= 4, got N = {basis.N}")
        lhs = _tensor_lhs(basis, phi, q)
        return GramIdentityCheck(lhs, rhs, abs(lhs / rhs - 1.0), 0.0, mode)
    if mode != "mc":
        raise InputError(f"unknown mode {mode!r}")
    check_seed(seed)

    def chunk(rng, size):
        x = uniform_sphere(rng, (size, basis.N))
        logv = basis.log_slater(x)
        if phi is not None:
            logv = logv - basis.k * phi.values(x.reshape(-1, 3)).reshape(size, basis.N).sum(axis=1)
        v = np.exp(logv)
        return float(np.sum(v)), float(np.sum(v * v))

    parts = map_chunks(seed, n_samples, chunk)
    s1 = sum(p[0] for p in parts)
    s2 = sum(p[1] for p in parts)
    mean = s1 / n_samples
    var = max(s2 / n_samples - mean * mean, 0.0)
    se = math.sqrt(var / max(n_samples - 1, 1))
    return GramIdentityCheck(mean, rhs, abs(mean / rhs - 1.0), se, mode, n_samples)
