"""Monte Carlo partition functions, divergence diagnostics and stability thresholds.

The partition function at level ``k`` is

    Z_{N,f}(-gamma) = int_{X^N} |det S^(k)|^{-2 gamma / k} dV_f^{(x) N}

and ``gamma_k`` is the supremum of ``gamma`` for which it is finite.  With
``W = |det S^(k)|^{2/k}``, ``gamma_k`` is the tail index of ``1/W``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Iterator, Sequence

import numpy as np

from .errors import DomainError, InputError, NumericError
from .geometry import Density, _frame, uniform_density
from .quantization import SectionBasis, section_basis
from .streams import CHUNK, check_seed, map_chunks, substream, uniform_sphere

DOMINANCE_SHARE = 0.5
DOMINANCE_MIN_SAMPLES = 100_000
HILL_FRACTION = 0.01
HILL_BAND = (0.001, 0.003, 0.02)
HILL_MIN_TAIL = 50
BOOTSTRAP_ROUNDS = 200
# bootstrap draws live far away from the sampling substreams
_BOOTSTRAP_STREAM = 1 << 40


@dataclass
class MCEstimate:
    mean: float
    stderr: float
    n_samples: int
    seed: int
    diverged: bool
    max_share: float
    tail_index: float
    gamma: float = 0.0
    log_mean: float = 0.0

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class GammaEstimate:
    value: float
    interval: tuple[float, float]
    method: str
    k: int
    m: int
    density: dict = field(default_factory=dict)
    scan: list = field(default_factory=list)

    def __post_init__(self):
        lo, hi = self.interval
        if not (self.value > 0 and lo <= self.value <= hi):
            raise NumericError(f"inconsistent threshold estimate {self.value} with interval {self.interval}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["interval"] = list(self.interval)
        return d


@dataclass
class ConfigurationChunk:
    index: int
    points: np.ndarray
    log_weights: np.ndarray


# ---------------------------------------------------------------------------
# sampling


def _cone_draw(rng: np.random.Generator, size: int, p: np.ndarray, b: float) -> np.ndarray:
    """Points with density ``b t^(b-1)`` against ``omega/V``, where ``t = |x - p|^2 / 4``.

    Under the uniform measure ``t`` is uniform on [0, 1], so ``t = U^(1/b)``.
    """
    t = rng.uniform(size=size) ** (1.0 / b)
    ang = rng.uniform(0.0, 2.0 * np.pi, size=size)
    c = 1.0 - 2.0 * t
    s = 2.0 * np.sqrt(t * (1.0 - t))
    e1, e2 = _frame(p)
    return c[:, None] * p + s[:, None] * (np.cos(ang)[:, None] * e1 + np.sin(ang)[:, None] * e2)


def _mixture_log_density(x: np.ndarray, cones: np.ndarray, b: float) -> np.ndarray:
    diff = x[:, None, :] - cones[None, :, :]
    t = np.sum(diff * diff, axis=-1) / 4.0
    with np.errstate(divide="ignore"):
        cone = np.mean(b * t ** (b - 1.0), axis=1)
    return np.log(0.5 + 0.5 * cone)


def _draw_points(rng: np.random.Generator, size: int, f: Density) -> tuple[np.ndarray, np.ndarray]:
    """``size`` points and log importance weights ``log f(x) - log q(x)``."""
    if f.is_uniform:
        return uniform_sphere(rng, size), np.zeros(size)
    if f.kind != "conic":
        x = uniform_sphere(rng, size)
        return x, f.log_values(x)
    # half uniform, half from the normalized single-cone profiles
    cones = np.asarray(f.points)
    which = rng.integers(0, 2 * len(cones), size=size)
    x = uniform_sphere(rng, size)
    for i, p in enumerate(cones):
        sel = which == len(cones) + i
        x[sel] = _cone_draw(rng, int(sel.sum()), p, f.b)
    return x, f.log_values(x) - _mixture_log_density(x, cones, f.b)


def _draw_chunk(rng: np.random.Generator, size: int, N: int, f: Density) -> tuple[np.ndarray, np.ndarray]:
    x, lw = _draw_points(rng, size * N, f)
    return x.reshape(size, N, 3), lw.reshape(size, N).sum(axis=1)


def sample_configurations(n: int, N: int, f: Density | None = None, seed: int = 0) -> Iterator[ConfigurationChunk]:
    """Stream of i.i.d. ``N``-point configurations from ``dV_f^N`` in chunks.

    Uniform ``f`` gives unit weights. Smooth ``f`` samples ``dV`` and weights
    by ``prod f(x_i)``; conic ``f`` samples a mixture matched to the cone
    singularities. Weights are kept in the log domain.
    """
    f = uniform_density() if f is None else f
    check_seed(seed)
    if N < 1:
        raise InputError(f"N must be positive, got {N}")
    full, rest = divmod(int(n), CHUNK)
    if n < 1:
        raise InputError(f"need at least one sample, got {n}")
    sizes = [CHUNK] * full + ([rest] if rest else [])
    for i, size in enumerate(sizes):
        pts, lw = _draw_chunk(substream(seed, i), size, N, f)
        yield ConfigurationChunk(i, pts, lw)


@dataclass
class SlaterSample:
    """Per-configuration ``log |det S|^2`` and log importance weights."""

    log_det: np.ndarray
    log_weights: np.ndarray
    k: int
    m: int
    seed: int
    density: dict

    @property
    def n(self) -> int:
        return len(self.log_det)

    def log_terms(self, gamma: float) -> np.ndarray:
        if gamma == 0:
            return self.log_weights.copy()
        with np.errstate(invalid="ignore"):
            return -(gamma / self.k) * self.log_det + self.log_weights


def draw_slater(
    k: int,
    f: Density | None = None,
    n_samples: int = 1_000_000,
    seed: int = 0,
    basis: SectionBasis | None = None,
    m: int = 1,
    workers: int | None = None,
) -> SlaterSample:
    f = uniform_density() if f is None else f
    basis = section_basis(m, k) if basis is None else basis
    if basis.k != k:
        raise InputError("basis level disagrees with k")
    check_seed(seed)

    def chunk(rng, size):
        x, lw = _draw_chunk(rng, size, basis.N, f)
        return basis.log_slater(x), lw

    parts = map_chunks(seed, n_samples, chunk, workers)
    return SlaterSample(
        np.concatenate([p[0] for p in parts]),
        np.concatenate([p[1] for p in parts]),
        basis.k,
        basis.m,
        int(seed),
        f.describe(),
    )


# ---------------------------------------------------------------------------
# tail diagnostics


def _tail(log_y: np.ndarray, weights: np.ndarray | None, fraction: float):
    n = len(log_y)
    kk = int(fraction * n)
    if kk < HILL_MIN_TAIL:
        raise NumericError(
            f"only {kk} tail samples at top fraction {fraction}; need {HILL_MIN_TAIL} (increase n_samples)"
        )
    order = np.argsort(log_y, kind="stable")[::-1]
    top = order[: kk + 1]
    excess = log_y[top[:kk]] - log_y[top[kk]]
    w = np.ones(kk) if weights is None else weights[top[:kk]]
    return excess, w


def hill_index(log_y, weights=None, fraction: float = HILL_FRACTION) -> float:
    """(Weighted) Hill estimate of the tail index of ``Y`` from ``log Y``.

    Uses the top ``fraction`` of the sample; importance weights turn it into
    the weighted Pareto maximum-likelihood estimate.
    """
    log_y = np.asarray(log_y, dtype=float)
    if np.any(np.isposinf(log_y)):
        return 0.0
    excess, w = _tail(log_y, None if weights is None else np.asarray(weights, float), fraction)
    denom = float(np.dot(w, excess))
    return math.inf if denom == 0 else float(np.sum(w) / denom)


def hill_bootstrap(log_y, weights=None, fraction: float = HILL_FRACTION, seed: int = 0, rounds: int = BOOTSTRAP_ROUNDS):
    """Percentile (2.5%, 97.5%) interval from resampled log-excesses."""
    log_y = np.asarray(log_y, dtype=float)
    excess, w = _tail(log_y, None if weights is None else np.asarray(weights, float), fraction)
    rng = substream(seed, _BOOTSTRAP_STREAM)
    idx = rng.integers(0, len(excess), size=(rounds, len(excess)))
    est = np.sum(w[idx], axis=1) / np.sum(w[idx] * excess[idx], axis=1)
    lo, hi = np.percentile(est, [2.5, 97.5])
    return float(lo), float(hi)


def _summarize(log_t: np.ndarray, seed: int, gamma: float) -> MCEstimate:
    n = len(log_t)
    if np.any(np.isposinf(log_t)) or np.any(np.isnan(log_t)):
        return MCEstimate(math.inf, math.inf, n, seed, True, 1.0, 0.0, gamma, math.inf)
    shift = float(np.max(log_t))
    v = np.exp(log_t - shift)
    s = float(np.sum(v))
    mean_scaled = s / n
    var_scaled = float(np.sum((v - mean_scaled) ** 2)) / max(n - 1, 1)
    log_mean = shift + math.log(mean_scaled)
    mean = math.exp(log_mean) if log_mean < 700 else math.inf
    se = math.exp(shift) * math.sqrt(var_scaled / n) if shift < 700 else math.inf
    share = 1.0 / s
    try:
        alpha = hill_index(log_t) if np.ptp(log_t) > 0 else math.inf
    except NumericError:
        alpha = math.inf
    diverged = (share > DOMINANCE_SHARE and n >= DOMINANCE_MIN_SAMPLES) or alpha < 1.0
    return MCEstimate(mean, se, n, seed, bool(diverged), share, alpha, gamma, log_mean)


def partition_from_sample(sample: SlaterSample, gamma: float) -> MCEstimate:
    if not gamma >= 0:
        raise InputError(f"gamma must be nonnegative, got {gamma}")
    return _summarize(sample.log_terms(gamma), sample.seed, float(gamma))


def partition_mc(
    gamma: float,
    k: int,
    f: Density | None = None,
    n_samples: int = 1_000_000,
    seed: int = 0,
    basis: SectionBasis | None = None,
    m: int = 1,
    workers: int | None = None,
) -> MCEstimate:
    """Importance-sampled estimate of ``Z_{N,f}(-gamma)``.

    ``diverged`` is set when the largest term carries more than half of the
    sum (at ``n >= 1e5``) or when the Hill tail index of the terms is below 1.
    """
    if not gamma >= 0:
        raise InputError(f"gamma must be nonnegative, got {gamma}")
    f = uniform_density() if f is None else f
    if gamma == 0 and f.is_uniform:
        check_seed(seed)
        if n_samples < 1:
            raise InputError(f"need at least one sample, got {n_samples}")
        return MCEstimate(1.0, 0.0, int(n_samples), int(seed), False, 1.0 / n_samples, math.inf, 0.0, 0.0)
    sample = draw_slater(k, f, n_samples, seed, basis, m, workers)
    return partition_from_sample(sample, gamma)


# ---------------------------------------------------------------------------
# thresholds


def gamma_k_exact_p1(m: int, k: int, f: Density | None = None) -> GammaEstimate:
    """Collision-exponent threshold on P^1 with the uniform density.

    A cluster of ``p`` points within distance ``r`` has volume ``r^(2(p-1))``
    while ``W`` vanishes like ``r^(p(p-1)/k)``, giving ``2k/p``; the full
    cluster ``p = N`` is the binding one.
    """
    if f is not None and not f.is_uniform:
        raise InputError("the exact formula covers the uniform density only; use gamma_k_tail_estimate")
    basis = section_basis(m, k)
    v = 2.0 * k / basis.N
    return GammaEstimate(v, (v, v), "exact-exponent", int(k), int(m), uniform_density().describe())


def monotone_flags(flags: Sequence[bool]) -> tuple[list[bool], bool]:
    """Once diverged, stay diverged; the second value reports whether a fix was needed."""
    out, seen = [], False
    for fl in flags:
        seen = seen or bool(fl)
        out.append(seen)
    return out, out != [bool(x) for x in flags]


def divergence_scan(sample: SlaterSample, gamma_grid: Sequence[float]) -> list[dict]:
    grid = [float(g) for g in gamma_grid]
    if not grid or any(g <= 0 for g in grid) or any(b <= a for a, b in zip(grid, grid[1:])):
        raise InputError("gamma grid must be positive and strictly increasing")
    rows = []
    for g in grid:
        est = partition_from_sample(sample, g)
        rows.append(
            {
                "gamma": g,
                "mean": est.mean,
                "stderr": est.stderr,
                "max_share": est.max_share,
                "tail_index": est.tail_index,
                "diverged": est.diverged,
            }
        )
    fixed, changed = monotone_flags([r["diverged"] for r in rows])
    for r, fl in zip(rows, fixed):
        r["raw_diverged"] = r["diverged"]
        r["diverged"] = fl
    if changed:
        rows[-1]["monotone_fix"] = True
    return rows


DEFAULT_GRID = tuple(round(0.1 * i, 10) for i in range(1, 21))


def gamma_k_tail_estimate(
    k: int,
    f: Density | None = None,
    n_samples: int = 1_000_000,
    seed: int = 0,
    gamma_grid: Sequence[float] = DEFAULT_GRID,
    basis: SectionBasis | None = None,
    m: int = 1,
    workers: int | None = None,
) -> GammaEstimate:
    """Threshold estimate from the lower tail of ``W = |det S|^(2/k)``.

    The point estimate is the Hill index of ``1/W`` at the top 1%; the interval
    joins bootstrap percentile intervals with the spread of Hill estimates
    over the fractions in ``HILL_BAND``. The divergence scan over
    ``gamma_grid`` overrides the estimate only when it flags divergence below
    the Hill value.  The Hill plot drifts with the tail fraction when the
    tail carries slowly varying corrections, so the interval also spans the
    bootstrap interval at the smallest band fraction.
    """
    f = uniform_density() if f is None else f
    sample = draw_slater(k, f, n_samples, seed, basis, m, workers)
    log_y = -sample.log_det / sample.k
    w = None if f.is_uniform else np.exp(sample.log_weights - np.max(sample.log_weights))
    value = hill_index(log_y, w)
    lo, hi = hill_bootstrap(log_y, w, seed=seed)
    lo_s, hi_s = hill_bootstrap(log_y, w, fraction=HILL_BAND[0], seed=seed)
    band = [hill_index(log_y, w, fr) for fr in HILL_BAND]
    lo, hi = min(lo, lo_s, value, *band), max(hi, hi_s, value, *band)
    rows = divergence_scan(sample, gamma_grid)
    method = "tail-index"
    first = next((r["gamma"] for r in rows if r["diverged"]), None)
    if first is not None and first < lo:
        prev = [r["gamma"] for r in rows if r["gamma"] < first]
        lo_scan = prev[-1] if prev else first / 2
        value = 0.5 * (lo_scan + first)
        lo, hi = lo_scan, first
        method = "divergence-scan"
    if not value > 0:
        raise NumericError("threshold estimate is not positive; the sample is degenerate")
    return GammaEstimate(value, (lo, hi), method, sample.k, sample.m, sample.density, rows)


def threshold_sequence(m: int, k_max: int) -> list[GammaEstimate]:
    """``gamma_k`` for ``k = 1..k_max`` from the exact formula (no extrapolation)."""
    if k_max < 1:
        raise InputError("k_max must be positive")
    return [gamma_k_exact_p1(m, k) for k in range(1, k_max + 1)]


def require_convergent(gamma: float, k: int, m: int, f: Density | None, estimate: MCEstimate | None = None) -> None:
    """Raise ``DomainError`` when ``Z(-gamma)`` is known or observed to diverge."""
    f = uniform_density() if f is None else f
    if f.is_uniform:
        g = gamma_k_exact_p1(m, k).value
        if gamma >= g:
            raise DomainError(f"gamma = {gamma:.6g} is not below the threshold gamma_k = {g:.6g}; Z diverges")
    if estimate is not None and estimate.diverged:
        raise DomainError(
            f"partition function at gamma = {gamma:.6g} flagged divergent "
            f"(max share {estimate.max_share:.3g}, tail index {estimate.tail_index:.3g})"
        )
