"""Counter-based random streams and chunked parallel maps.

Every chunk of ``CHUNK`` samples draws from its own Philox substream keyed by
``(seed, chunk index)``, and chunk results are always reduced in chunk order,
so outputs do not depend on how many workers ran them.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable

import numpy as np

from .errors import InputError

CHUNK = 1 << 16
THREADS_ENV = "GIBBSK_THREADS"


def worker_count(requested: int | None = None) -> int:
    cap = os.environ.get(THREADS_ENV)
    n = requested if requested is not None else (os.cpu_count() or 1)
    if cap:
        try:
            n = min(n, max(1, int(cap)))
        except ValueError as exc:
            raise InputError(f"{THREADS_ENV} must be an integer, got {cap!r}") from exc
    return max(1, int(n))


def check_seed(seed) -> int:
    if isinstance(seed, bool) or int(seed) != seed or not 0 <= int(seed) < 2**64:
        raise InputError(f"seed must be an integer in [0, 2**64), got {seed!r}")
    return int(seed)


def substream(seed: int, index: int) -> np.random.Generator:
    """Generator for chunk ``index`` of stream ``seed``."""
    return np.random.Generator(np.random.Philox(key=check_seed(seed)).jumped(int(index) + 1))


def chunk_sizes(n: int, chunk: int = CHUNK) -> list[int]:
    if n < 1:
        raise InputError(f"need at least one sample, got {n}")
    full, rest = divmod(int(n), chunk)
    return [chunk] * full + ([rest] if rest else [])


def map_chunks(seed: int, n: int, fn: Callable[[np.random.Generator, int], object], workers: int | None = None) -> list:
    """Apply ``fn(rng, size)`` to each chunk; results are returned in chunk order."""
    sizes = chunk_sizes(n)
    jobs = [(substream(seed, i), s) for i, s in enumerate(sizes)]
    nw = min(worker_count(workers), len(jobs))
    if nw == 1:
        return [fn(rng, s) for rng, s in jobs]
    with ThreadPoolExecutor(max_workers=nw) as pool:
        return list(pool.map(lambda job: fn(*job), jobs))


def uniform_sphere(rng: np.random.Generator, shape) -> np.ndarray:
    """Uniform points on the unit sphere (Archimedes: cos theta is uniform)."""
    shape = tuple(np.atleast_1d(shape))
    z = rng.uniform(-1.0, 1.0, size=shape)
    ang = rng.uniform(0.0, 2.0 * np.pi, size=shape)
    r = np.sqrt(np.clip(1.0 - z * z, 0.0, None))
    return np.stack([r * np.cos(ang), r * np.sin(ang), z], axis=-1)
