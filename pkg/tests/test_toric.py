from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gibbsk.errors import DomainError, InputError
from gibbsk.toric import (
    SURFACES,
    ToricSurface,
    check_csck_criterion,
    find_m0,
    format_rational,
    golden_table,
    hirzebruch,
    intersect,
    is_ample,
    is_nef,
    load_fan,
    mu,
    mu_b,
    nef_threshold,
    nef_threshold_details,
    p1_x_p1,
    parse_divisor,
    parse_fan,
    projective_plane,
    random_divisor,
    rational,
)

F = Fraction


@pytest.fixture(params=["P2", "P1xP1", "F1"])
def surface(request):
    return SURFACES[request.param]()


def test_plane_line_self_intersection():
    P2 = projective_plane()
    assert intersect(P2.prime(0), P2.prime(0), P2) == 1


def test_hirzebruch_exceptional_curve():
    F1 = hirzebruch(1)
    # the curve with self-intersection -1
    assert sorted(-a for a in F1.a) == [-1, 0, 0, 1]


def test_canonical_degree(surface):
    assert intersect(surface.canonical(), surface.canonical(), surface) == 12 - surface.n_rays


def test_anticanonical_is_all_ones(surface):
    assert surface.anticanonical().coefficients == (F(1),) * surface.n_rays


def test_intersection_is_symmetric_bilinear(surface):
    rng = np.random.default_rng(0)
    for _ in range(20):
        a, b, c = (random_divisor(rng, surface) for _ in range(3))
        assert intersect(a, b, surface) == intersect(b, a, surface)
        assert intersect(a + b, c, surface) == intersect(a, c, surface) + intersect(b, c, surface)


def test_linear_equivalence_is_respected():
    P2 = projective_plane()
    for i in range(3):
        assert intersect(P2.prime(i), P2.prime(0), P2) == 1


def test_golden_table_exact():
    rows = {(r["surface"], r["L"]): r for r in golden_table()}
    assert rows[("P2", "H")]["mu"] == 3 and rows[("P2", "H")]["s"] == 3 and rows[("P2", "H")]["bound"] == 3
    q = rows[("P1xP1", "O(1,1)")]
    assert (q["mu"], q["s"], q["bound"]) == (2, 2, 2)
    f = rows[("F1", "-K")]
    assert (f["mu"], f["s"], f["bound"]) == (1, 1, 1)
    assert all(isinstance(v, Fraction) for r in rows.values() for v in (r["mu"], r["s"], r["bound"]))


def test_find_m0_examples():
    P2, Q = projective_plane(), p1_x_p1()
    assert find_m0(P2, P2.prime(0), F(1, 2)) == 7
    assert find_m0(Q, Q.prime(0) + Q.prime(1), F(1, 2)) == 5
    assert find_m0(P2, P2.prime(0), 1) is None


def test_criterion_examples():
    P2 = projective_plane()
    H = P2.prime(0)
    rep = check_csck_criterion(P2, H, F(7, 2))
    assert rep.satisfied and rep.bound == 3
    rep0 = check_csck_criterion(P2, H, 0)
    assert not rep0.satisfied and not rep0.twisted_ample and not rep0.threshold_ok
    assert rep.to_dict()["mu"] == "3/1"


def test_conic_criterion_report():
    P2 = projective_plane()
    H = P2.prime(0)
    rep = check_csck_criterion(P2, H, 8, b=F(1, 2), D=H)
    assert rep.mu_b == mu_b(H, H, F(1, 2), P2)
    assert rep.m0 == 7
    with pytest.raises(InputError):
        check_csck_criterion(P2, H, 8, b=F(1, 2))


def test_mu_values():
    P2, Q = projective_plane(), p1_x_p1()
    assert mu(P2.prime(0), P2) == 3
    assert mu(Q.prime(0) + Q.prime(1), Q) == 2


def test_threshold_of_multiple_of_l(surface):
    L = surface.anticanonical()
    assert nef_threshold(F(7, 2) * L, L, surface) == F(7, 2)


def test_nef_threshold_boundary_curves():
    P2 = projective_plane()
    s, curves = nef_threshold_details(P2.anticanonical(), P2.prime(0), P2)
    assert s == 3 and curves == [0, 1, 2]


def test_ample_and_nef():
    Q = p1_x_p1()
    assert is_ample(Q.prime(0) + Q.prime(1), Q)
    assert not is_ample(Q.prime(0), Q) and is_nef(Q.prime(0), Q)
    with pytest.raises(DomainError):
        mu(Q.prime(0), Q)
    with pytest.raises(DomainError):
        nef_threshold(Q.anticanonical(), Q.prime(0), Q)


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), name=st.sampled_from(["P2", "P1xP1", "F1"]))
def test_threshold_superadditive(seed, name):
    X = SURFACES[name]()
    rng = np.random.default_rng(seed)
    L = X.anticanonical()
    F1, F2 = random_divisor(rng, X), random_divisor(rng, X)
    assert nef_threshold(F1, L, X) + nef_threshold(F2, L, X) <= nef_threshold(F1 + F2, L, X)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), p=st.integers(1, 20), r=st.integers(1, 20))
def test_threshold_homogeneity(seed, p, r):
    X = hirzebruch(1)
    a = F(p, r)
    Fd = random_divisor(np.random.default_rng(seed), X)
    L = X.anticanonical()
    assert nef_threshold(Fd, a * L, X) == nef_threshold(Fd, L, X) / a
    assert nef_threshold(a * Fd, L, X) == a * nef_threshold(Fd, L, X)


def test_fan_validation():
    with pytest.raises(InputError):
        ToricSurface(((1, 0), (0, 1)))
    with pytest.raises(InputError):
        ToricSurface(((1, 0), (-1, -1), (0, 1)))  # clockwise


def test_parse_divisor_forms():
    P2, Q = projective_plane(), p1_x_p1()
    assert parse_divisor("H", P2) == P2.prime(0)
    assert parse_divisor("-K", P2) == P2.anticanonical()
    assert parse_divisor("2D0 + 1/2 D2", P2).coefficients == (F(2), F(0), F(1, 2))
    assert parse_divisor("O(1,1)", Q) == Q.prime(0) + Q.prime(1)
    assert parse_divisor("1 0 0", P2) == P2.prime(0)
    for bad in ("", "D9", "2X", "D0 D1"):
        with pytest.raises(InputError):
            parse_divisor(bad, P2)


def test_parse_fan_with_named_divisors(tmp_path):
    text = "# Hirzebruch F1\n1 0\n1 1\n0 1\n-1 -1\nL = D0 + 2D1  # ample\n"
    X, named = parse_fan(text, "F1")
    assert X.n_rays == 4 and "L" in named
    path = tmp_path / "f1.fan"
    path.write_text(text)
    Y, _ = load_fan(path)
    assert Y.rays == X.rays and Y.name == "f1"
    with pytest.raises(InputError, match="line 2"):
        parse_fan("1 0\n1 x\n")


def test_rational_helpers():
    assert rational("3/4") == F(3, 4)
    assert rational(0.5) == F(1, 2)
    assert format_rational(F(3)) == "3/1"
    with pytest.raises(InputError):
        rational("abc")
