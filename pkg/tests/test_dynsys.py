import math
from fractions import Fraction

import pytest
import sympy
from hypothesis import assume, given, strategies as st

from arithdyn.dynsys import (
    BaseLocus,
    DivisorClass,
    OrbitCache,
    ProjPoint,
    base_locus,
    build_system,
    compose,
    farey,
    iterate,
    p1_points,
    power_map,
    pullback_section,
    rational_points,
    relative_degree_check,
    resultant,
    section_pullback_matrix,
    section_space,
)
from arithdyn.errors import DegreeZero, NotAMorphism, NotEquivariant

X, Y = sympy.symbols("x y")
SWAP = build_system(k=2, perm=[1, 0], components=[((1, 0), (0, 1)), ((1, 0, 0), (0, 0, 1))])


def form_to_poly(F):
    d = len(F) - 1
    return sum(c * X ** (d - j) * Y**j for j, c in enumerate(F))


forms = st.integers(1, 3).flatmap(lambda d: st.tuples(
    st.lists(st.integers(-4, 4), min_size=d + 1, max_size=d + 1),
    st.lists(st.integers(-4, 4), min_size=d + 1, max_size=d + 1),
))


@st.composite
def systems(draw, k_max=3):
    k = draw(st.integers(1, k_max))
    perm = draw(st.permutations(range(k)))
    comps = []
    for _ in range(k):
        F, G = draw(forms)
        assume(resultant(F, G) != 0)
        comps.append((F, G))
    return build_system(k=k, perm=perm, components=comps)


@st.composite
def points(draw, k):
    coords = []
    for _ in range(k):
        x, y = draw(st.tuples(st.integers(-9, 9), st.integers(-9, 9)))
        assume((x, y) != (0, 0))
        coords.append((x, y))
    return ProjPoint(tuple(coords))


# --- forms and systems ---------------------------------------------------------


@given(forms)
def test_resultant_matches_sympy(pair):
    F, G = pair
    r = resultant(F, G)
    if F[0] != 0 and G[0] != 0:
        ref = sympy.resultant(form_to_poly(F).subs(Y, 1), form_to_poly(G).subs(Y, 1), X)
        assert abs(r) == abs(int(ref))
    common = sympy.gcd(form_to_poly(F), form_to_poly(G))
    shared = common == 0 or sympy.Poly(common, X, Y).total_degree() > 0
    assert (r == 0) == shared


def test_build_system_examples():
    assert power_map(2, 3).pullback.rows == ((2, 0), (0, 3))
    assert SWAP.pullback.rows == ((0, 2), (1, 0))
    f = build_system({"k": 1, "components": [{"degree": 2, "F_coeffs": [1, 0, 1], "G_coeffs": [0, 0, 1]}]})
    assert f.resultants == (1,)
    with pytest.raises(NotAMorphism) as e:
        build_system(k=2, perm=[0, 1], components=[((1, 0), (0, 1)), ((1, 1), (2, 2))])
    assert e.value.factor == 1
    with pytest.raises(DegreeZero):
        build_system(k=1, components=[((1,), (1,))])
    with pytest.raises(ValueError):
        build_system(k=2, perm=[0, 0], components=[((1, 0), (0, 1))] * 2)


@given(systems(), st.data())
def test_pullback_is_contravariant(f, data):
    g = data.draw(systems().filter(lambda s: s.k == f.k))
    assert compose(f, g).pullback == g.pullback @ f.pullback


@given(systems(2), st.data())
def test_compose_agrees_with_pointwise_application(f, data):
    g = data.draw(systems(2).filter(lambda s: s.k == f.k))
    P = data.draw(points(f.k))
    assert compose(f, g).apply(P) == f.apply(g.apply(P))


# --- points and orbits ---------------------------------------------------------


def test_point_normalization_and_parsing():
    assert ProjPoint(((4, 6),)).coords == ((2, 3),)
    assert ProjPoint(((-2, -3), (-1, 0))).coords == ((2, 3), (1, 0))
    assert ProjPoint.parse("([2:1],[3:1])") == ProjPoint.affine(2, 3)
    assert ProjPoint.parse("(2/3,inf)") == ProjPoint(((2, 3), (1, 0)))
    assert str(ProjPoint.affine(Fraction(1, 2), None)) == "(1/2,inf)"
    with pytest.raises(ValueError):
        ProjPoint(((0, 0),))


def test_orbit_examples():
    orb = iterate(power_map(2, 3), ProjPoint.affine(2, 2), 2)
    assert orb[-1] == ProjPoint.affine(16, 512) and not orb.truncated
    assert set(iterate(power_map(2), ProjPoint.affine(1), 7).points) == {ProjPoint.affine(1)}
    orb = iterate(SWAP, ProjPoint.affine(2, 3), 3)
    assert [str(p) for p in orb.points] == ["(2,3)", "(3,4)", "(4,9)", "(9,16)"]


def test_orbit_truncates_at_digit_budget():
    orb = iterate(power_map(2), ProjPoint.affine(2), 30, digit_budget=50)
    assert orb.truncated
    assert all(len(str(p.coords[0][0])) <= 50 for p in orb.points)
    assert len(orb) == 8  # 2^(2^7) has 39 digits, 2^(2^8) has 78


@given(systems(2), st.data())
def test_orbit_points_are_reduced(f, data):
    P = data.draw(points(f.k))
    for Q in iterate(f, P, 4, digit_budget=2000).points:
        assert all(math.gcd(x, y) == 1 for x, y in Q.coords)
        assert ProjPoint(Q.coords) == Q


def test_degree_growth_bounded_by_dynamical_degree():
    f = power_map(2, 3)
    orb = iterate(f, ProjPoint.affine(Fraction(5, 3), Fraction(7, 2)), 12)

    def bits(Q):
        return max(abs(c).bit_length() for pair in Q.coords for c in pair)

    b0 = bits(orb[0])
    for n, Q in enumerate(orb.points):
        assert bits(Q) <= 2 * b0 * 3**n


def test_orbit_cache(tmp_path):
    path = tmp_path / "orbits.jsonl"
    cache = OrbitCache(path)
    f, P = power_map(2, 3), ProjPoint.affine(2, 5)
    a = cache.get(f, P, 5)
    assert cache.get(f, P, 3).points == a.points[:4]
    again = OrbitCache(path)
    assert len(again) == 1
    assert again.get(f, P, 5).points == a.points


def test_farey_and_p1_points_against_brute_force():
    assert farey(3) == [(0, 1), (1, 3), (1, 2), (2, 3), (1, 1)]
    for N in (1, 4, 9):
        brute = {
            ProjPoint(((x, y),)).coords[0]
            for x in range(-N, N + 1)
            for y in range(-N, N + 1)
            if (x, y) != (0, 0)
        }
        assert set(p1_points(N)) == brute
        assert len(p1_points(N)) == len(brute)


def test_rational_points_norms():
    pts = rational_points(2, 10)
    assert all(a * b <= 10 for a, b in (P.naive_heights() for P in pts))
    assert len(set(pts)) == len(pts)
    box = rational_points(2, 3, norm="max")
    assert len(box) == len(p1_points(3)) ** 2
    assert len(rational_points(2, 6, weights=[1, 2])) < len(pts)


# --- sections ------------------------------------------------------------------


@pytest.mark.parametrize("D, dim", [((1, 1), 4), ((-1, 0), 0), ((2, 3), 12), ((0, 0), 1)])
def test_section_space_dims(D, dim):
    assert section_space(D).dim == dim


@pytest.mark.parametrize(
    "D, locus", [((1, 1), BaseLocus.EMPTY), ((0, 0), BaseLocus.EMPTY), ((0, -2), BaseLocus.EVERYTHING)]
)
def test_base_locus(D, locus):
    assert base_locus(DivisorClass(D)) is locus


def test_pullback_section_examples():
    # x is the monomial with y-exponent 0
    s = pullback_section(power_map(2), (1,), [1, 0])
    assert s.multidegree == (2,) and s.coefficients == (1, 0, 0)
    s = pullback_section(SWAP, (1, 0), [1, 0])
    assert s.multidegree == (0, 1) and s.coefficients == (1, 0)
    A = section_pullback_matrix(power_map(2), (1,))
    assert len(A) == 3 and sympy.Matrix(A).rank() == 2


@given(systems(2), st.lists(st.integers(0, 2), min_size=2, max_size=2))
def test_section_pullback_is_injective(f, a):
    D = tuple(a[: f.k])
    A = section_pullback_matrix(f, D)
    n = section_space(D).dim
    assert sympy.Matrix(A).rank() == n
    assert pullback_section(f, D, [1] * n).injective


@given(systems(2), st.lists(st.integers(0, 2), min_size=2, max_size=2), st.data())
def test_pulled_section_evaluates_as_composite(f, a, data):
    D = tuple(a[: f.k])
    space = section_space(D)
    s = data.draw(st.lists(st.integers(-3, 3), min_size=space.dim, max_size=space.dim))
    P = data.draw(points(f.k))
    pulled = pullback_section(f, D, s)
    tgt = section_space(pulled.multidegree)

    def ev(sp, coeffs, Q):
        total = 0
        for c, mono in zip(coeffs, sp.monomials):
            term = c
            for (x, y), ai, j in zip(Q.coords, sp.multidegree, mono):
                term *= x ** (ai - j) * y**j
            total += term
        return total

    # equal up to the per-factor scalars removed by gcd reduction
    lhs = ev(tgt, pulled.coefficients, P)
    rhs = ev(space, s, f.apply(P))
    assert (lhs == 0) == (rhs == 0)


def test_base_locus_pullback_is_consistent():
    f = power_map(2, 3)
    for D in [(1, 0), (2, 2), (0, 0)]:
        assert base_locus(DivisorClass(D)) is BaseLocus.EMPTY
        assert base_locus(f.pullback @ D) is BaseLocus.EMPTY


# --- relative degree -----------------------------------------------------------


def test_relative_degree_examples():
    r = relative_degree_check(power_map(2, 3), [1])
    assert r.agrees and r.max_radius[0] <= 3 <= r.max_radius[1]
    f = build_system(
        k=3, perm=[1, 0, 2],
        components=[((1, 0), (0, 1)), ((1, 0, 0), (0, 0, 1)), ((1, 0, 0, 0, 0, 0), (0, 0, 0, 0, 0, 1))],
    )
    r = relative_degree_check(f, [2])
    assert r.agrees and r.radius[0] <= 5 <= r.radius[1]
    assert r.complement_radius[0] ** 2 <= 2 <= r.complement_radius[1] ** 2
    assert relative_degree_check(power_map(1, 1), [0]).agrees
    with pytest.raises(NotEquivariant):
        relative_degree_check(SWAP, [0])
