"""Exact intersection theory on smooth complete toric surfaces.

Torus-invariant divisors ``D_i`` correspond to rays ``v_i``; adjacent ones
meet in one point and ``D_i^2 = -a_i`` where ``v_{i-1} + v_{i+1} = a_i v_i``.
Everything here is ``Fraction`` arithmetic.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence

from .errors import DomainError, InputError

N_DIM = 2


def rational(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, bool):
        raise InputError(f"not a rational number: {x!r}")
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, str):
        try:
            return Fraction(x.strip())
        except (ValueError, ZeroDivisionError) as exc:
            raise InputError(f"not a rational number: {x!r}") from exc
    if isinstance(x, float):
        # decimal literal, not the binary expansion
        return Fraction(repr(x))
    raise InputError(f"not a rational number: {x!r}")


def format_rational(x: Fraction) -> str:
    return f"{x.numerator}/{x.denominator}"


@dataclass(frozen=True)
class ToricSurface:
    rays: tuple[tuple[int, int], ...]
    name: str = ""
    a: tuple[int, ...] = field(init=False)

    def __post_init__(self):
        rays = tuple((int(u), int(v)) for u, v in self.rays)
        if any((u, v) != r for (u, v), r in zip(rays, self.rays)):
            raise InputError("rays must have integer coordinates")
        n = len(rays)
        if n < 3:
            raise InputError(f"a complete fan needs at least 3 rays, got {n}")
        for i in range(n):
            (x0, y0), (x1, y1) = rays[i], rays[(i + 1) % n]
            if x0 * y1 - x1 * y0 != 1:
                raise InputError(
                    f"rays {i} and {(i + 1) % n} do not span a smooth counterclockwise cone (det must be +1)"
                )
        a = []
        for i in range(n):
            p, v, s = rays[i - 1], rays[i], rays[(i + 1) % n]
            w = (p[0] + s[0], p[1] + s[1])
            # w is parallel to v since det(p, v) = det(v, s) = 1
            ai = w[0] * v[0] + w[1] * v[1]
            norm = v[0] * v[0] + v[1] * v[1]
            if ai % norm or (w[0] * norm != ai * v[0]) or (w[1] * norm != ai * v[1]):
                raise InputError(f"wall relation at ray {i} is not integral")
            a.append(ai // norm)
        # a full counterclockwise turn: sum of a_i equals 3n - 12
        if sum(a) != 3 * n - 12:
            raise InputError("the rays wind around the origin more than once")
        object.__setattr__(self, "rays", rays)
        object.__setattr__(self, "a", tuple(a))

    @property
    def n_rays(self) -> int:
        return len(self.rays)

    def pairing(self, i: int, j: int) -> int:
        n = self.n_rays
        if i == j:
            return -self.a[i]
        return 1 if (i - j) % n in (1, n - 1) else 0

    def divisor(self, coefficients: Iterable) -> "TDivisor":
        c = tuple(rational(x) for x in coefficients)
        if len(c) != self.n_rays:
            raise InputError(f"divisor needs {self.n_rays} coefficients, got {len(c)}")
        return TDivisor(c)

    def prime(self, i: int) -> "TDivisor":
        if not 0 <= i < self.n_rays:
            raise InputError(f"no ray D{i} on a fan with {self.n_rays} rays")
        return TDivisor(tuple(Fraction(int(j == i)) for j in range(self.n_rays)))

    def anticanonical(self) -> "TDivisor":
        return TDivisor((Fraction(1),) * self.n_rays)

    def canonical(self) -> "TDivisor":
        return -self.anticanonical()

    def zero(self) -> "TDivisor":
        return TDivisor((Fraction(0),) * self.n_rays)

    def to_dict(self) -> dict:
        return {"name": self.name, "rays": [list(r) for r in self.rays], "self_intersections": [-a for a in self.a]}


@dataclass(frozen=True)
class TDivisor:
    coefficients: tuple[Fraction, ...]

    def __add__(self, other: "TDivisor") -> "TDivisor":
        _same_length(self, other)
        return TDivisor(tuple(a + b for a, b in zip(self.coefficients, other.coefficients)))

    def __sub__(self, other: "TDivisor") -> "TDivisor":
        return self + (-other)

    def __neg__(self) -> "TDivisor":
        return TDivisor(tuple(-a for a in self.coefficients))

    def __mul__(self, scalar) -> "TDivisor":
        s = rational(scalar)
        return TDivisor(tuple(s * a for a in self.coefficients))

    __rmul__ = __mul__

    def __str__(self) -> str:
        return " ".join(format_rational(c) for c in self.coefficients)

    def to_list(self) -> list[str]:
        return [format_rational(c) for c in self.coefficients]


def _same_length(d1: TDivisor, d2: TDivisor):
    if len(d1.coefficients) != len(d2.coefficients):
        raise InputError("divisors live on different fans")


def intersect(D1: TDivisor, D2: TDivisor, X: ToricSurface) -> Fraction:
    _same_length(D1, D2)
    if len(D1.coefficients) != X.n_rays:
        raise InputError("divisor does not match the fan")
    total = Fraction(0)
    for i, c in enumerate(D1.coefficients):
        if c == 0:
            continue
        for j, d in enumerate(D2.coefficients):
            if d:
                total += c * d * X.pairing(i, j)
    return total


def curve_degrees(L: TDivisor, X: ToricSurface) -> list[Fraction]:
    return [intersect(L, X.prime(i), X) for i in range(X.n_rays)]


def is_ample(L: TDivisor, X: ToricSurface) -> bool:
    """Toric Nakai: positive degree on every invariant curve."""
    return all(d > 0 for d in curve_degrees(L, X))


def is_nef(L: TDivisor, X: ToricSurface) -> bool:
    return all(d >= 0 for d in curve_degrees(L, X))


def _volume(L: TDivisor, X: ToricSurface) -> Fraction:
    v = intersect(L, L, X)
    if v == 0:
        raise DomainError("L^2 = 0; the slope is undefined")
    return v


def mu(L: TDivisor, X: ToricSurface) -> Fraction:
    """``-K.L / L^2``."""
    return intersect(X.anticanonical(), L, X) / _volume(L, X)


def mu_b(L: TDivisor, D: TDivisor, b, X: ToricSurface) -> Fraction:
    """``-(K + (1-b) D).L / L^2``."""
    b = _cone_parameter(b)
    return intersect(X.anticanonical() - (1 - b) * D, L, X) / _volume(L, X)


def _require_ample(L: TDivisor, X: ToricSurface):
    if not is_ample(L, X):
        degs = ", ".join(format_rational(d) for d in curve_degrees(L, X))
        raise DomainError(f"L is not ample (degrees on the invariant curves: {degs})")


def nef_threshold(F: TDivisor, L: TDivisor, X: ToricSurface) -> Fraction:
    """``sup{s : F - sL ample}`` as the minimum of ``(F.D_i)/(L.D_i)``."""
    return nef_threshold_details(F, L, X)[0]


def nef_threshold_details(F: TDivisor, L: TDivisor, X: ToricSurface) -> tuple[Fraction, list[int]]:
    """Threshold together with the curves on which ``F - sL`` has degree zero.

    The supremum is never attained: ``F - sL`` is nef but not ample there.
    """
    _require_ample(L, X)
    ratios = [intersect(F, X.prime(i), X) / d for i, d in enumerate(curve_degrees(L, X))]
    s = min(ratios)
    return s, [i for i, r in enumerate(ratios) if r == s]


def _cone_parameter(b) -> Fraction:
    b = rational(b)
    if not 0 < b <= 1:
        raise InputError(f"cone parameter b must lie in (0, 1], got {format_rational(b)}")
    return b


@dataclass
class StabilityReport:
    mu: Fraction
    s: Fraction
    bound: Fraction
    gamma: Fraction
    L_ample: bool
    twisted_ample: bool
    threshold_ok: bool
    b: Fraction | None = None
    mu_b: Fraction | None = None
    s_b: Fraction | None = None
    bound_b: Fraction | None = None
    m0: int | None = None
    boundary_curves: list = field(default_factory=list)
    rescaling_ok: bool = True

    @property
    def satisfied(self) -> bool:
        return self.twisted_ample and self.threshold_ok

    def to_dict(self) -> dict:
        out = {}
        for k, v in self.__dict__.items():
            out[k] = format_rational(v) if isinstance(v, Fraction) else v
        out["satisfied"] = self.satisfied
        return out


def check_csck_criterion(X: ToricSurface, L: TDivisor, gamma, b=None, D: TDivisor | None = None) -> StabilityReport:
    """Evaluate ``gamma > n mu - (n-1) s`` and ampleness of ``K + gamma L``.

    With a cone divisor ``D`` and parameter ``b`` the twisted versions use
    ``F = -(K + (1-b) D)`` and ``K + (1-b) D + gamma L``.
    """
    if (b is None) != (D is None):
        raise InputError("the cone parameter b and the divisor D must be given together")
    gamma = rational(gamma)
    _require_ample(L, X)
    m = mu(L, X)
    s, boundary = nef_threshold_details(X.anticanonical(), L, X)
    bound = N_DIM * m - (N_DIM - 1) * s
    rep = StabilityReport(
        mu=m,
        s=s,
        bound=bound,
        gamma=gamma,
        L_ample=True,
        twisted_ample=is_ample(X.canonical() + gamma * L, X),
        threshold_ok=gamma > bound,
        boundary_curves=boundary,
    )
    two = 2 * L
    rep.rescaling_ok = mu(two, X) == m / 2 and nef_threshold(X.anticanonical(), two, X) == s / 2
    if b is not None:
        b = _cone_parameter(b)
        F = X.anticanonical() - (1 - b) * D
        rep.b = b
        rep.mu_b = mu_b(L, D, b, X)
        rep.s_b = nef_threshold(F, L, X)
        rep.bound_b = N_DIM * rep.mu_b - (N_DIM - 1) * rep.s_b
        rep.twisted_ample = is_ample(-F + gamma * L, X)
        rep.threshold_ok = gamma > rep.bound_b
        rep.m0 = find_m0(X, L, b)
    return rep


def find_m0(X: ToricSurface, L: TDivisor, b) -> int | None:
    """Smallest integer ``m0 >= 1`` with ``n mu - (n-1) s - (1-b) m0 < 0`` and ``K + m0 L`` ample."""
    b = _cone_parameter(b)
    _require_ample(L, X)
    bound = N_DIM * mu(L, X) - (N_DIM - 1) * nef_threshold(X.anticanonical(), L, X)
    need = 1
    if b == 1:
        if bound >= 0:
            return None
    else:
        need = max(need, _floor(bound / (1 - b)) + 1)
    anti = X.anticanonical()
    for i, d in enumerate(curve_degrees(L, X)):
        need = max(need, _floor(intersect(anti, X.prime(i), X) / d) + 1)
    return need


def _floor(x: Fraction) -> int:
    return x.numerator // x.denominator


# ---------------------------------------------------------------------------
# standard surfaces and text formats


def projective_plane() -> ToricSurface:
    return ToricSurface(((1, 0), (0, 1), (-1, -1)), "P2")


def p1_x_p1() -> ToricSurface:
    return ToricSurface(((1, 0), (0, 1), (-1, 0), (0, -1)), "P1xP1")


def hirzebruch(a: int) -> ToricSurface:
    if a < 0:
        raise InputError("Hirzebruch index must be nonnegative")
    return ToricSurface(((1, 0), (0, 1), (-1, a), (0, -1)), f"F{a}")


SURFACES = {"P2": projective_plane, "P1xP1": p1_x_p1, "F0": p1_x_p1, "F1": lambda: hirzebruch(1)}

_TERM = re.compile(r"\s*([+-]?)\s*(\d+(?:/\d+)?)?\s*\*?\s*(H|K|D\d+|O\(\s*-?\d+\s*,\s*-?\d+\s*\))\s*")


def parse_divisor(text: str, X: ToricSurface, named: dict | None = None) -> TDivisor:
    """Parse ``"H"``, ``"-K"``, ``"2D0 + 1/2 D3"``, ``"O(1,1)"`` or a coefficient list.

    ``H`` is ``D0``; ``O(a,b)`` means ``a D0 + b D1``.
    """
    named = named or {}
    s = text.strip()
    if not s:
        raise InputError("empty divisor")
    if s in named:
        return named[s]
    parts = s.replace(",", " ").split() if not re.search(r"[A-Za-z(]", s) else None
    if parts:
        return X.divisor(parts)
    total, pos = X.zero(), 0
    while pos < len(s):
        mt = _TERM.match(s, pos)
        if not mt or mt.end() == pos:
            raise InputError(f"cannot parse divisor {text!r} at position {pos}")
        sign = -1 if mt.group(1) == "-" else 1
        if pos > 0 and not mt.group(1):
            raise InputError(f"missing '+' or '-' before term in {text!r}")
        coef = rational(mt.group(2) or 1) * sign
        sym = mt.group(3)
        if sym == "H":
            term = X.prime(0)
        elif sym == "K":
            term = X.canonical()
        elif sym.startswith("D"):
            term = X.prime(int(sym[1:]))
        else:
            a, c = (int(v) for v in sym[2:-1].split(","))
            term = a * X.prime(0) + c * X.prime(1)
        total = total + coef * term
        pos = mt.end()
    return total


def parse_fan(text: str, name: str = "") -> tuple[ToricSurface, dict]:
    """Read a fan: one ray per line as two integers.

    Lines ``name = <divisor>`` define named divisors; ``#`` starts a comment.
    """
    rays, pending = [], []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" in line:
            key, _, val = line.partition("=")
            pending.append((lineno, key.strip(), val.strip()))
            continue
        toks = line.split()
        if len(toks) != 2:
            raise InputError(f"line {lineno}: expected two integers, got {line!r}")
        try:
            rays.append((int(toks[0]), int(toks[1])))
        except ValueError as exc:
            raise InputError(f"line {lineno}: expected two integers, got {line!r}") from exc
    X = ToricSurface(tuple(rays), name)
    named = {}
    for lineno, key, val in pending:
        try:
            named[key] = parse_divisor(val, X, named)
        except InputError as exc:
            raise InputError(f"line {lineno}: {exc}") from exc
    return X, named


def load_fan(path: str | Path) -> tuple[ToricSurface, dict]:
    p = Path(path)
    return parse_fan(p.read_text(), p.stem)


def random_divisor(rng, X: ToricSurface, max_num: int = 9, max_den: int = 4) -> TDivisor:
    return X.divisor(Fraction(int(rng.integers(-max_num, max_num + 1)), int(rng.integers(1, max_den + 1))) for _ in X.rays)


def golden_table() -> list[dict]:
    """The reference rows ``(surface, L)`` used by the checks."""
    P2, Q, F1 = projective_plane(), p1_x_p1(), hirzebruch(1)
    rows = []
    for X, L, label in ((P2, P2.prime(0), "H"), (Q, Q.prime(0) + Q.prime(1), "O(1,1)"), (F1, F1.anticanonical(), "-K")):
        rep = check_csck_criterion(X, L, 0)
        rows.append({"surface": X.name, "L": label, "mu": rep.mu, "s": rep.s, "bound": rep.bound})
    return rows
