import math
from fractions import Fraction

import mpmath
import pytest
from hypothesis import given, settings, strategies as st

from arithdyn.dynsys import ProjPoint, build_system, compose, iterate, power_map, rational_points
from arithdyn.errors import (
    BudgetExceeded,
    DivergenceDetected,
    NotAnEigenclass,
    NotDiagonalizable,
    ThresholdAmbiguous,
)
from arithdyn.heights import (
    PlantedJordanBlock,
    arithmetic_degree,
    canonical_height,
    classify_point,
    eigenvalue_of_class,
    height_for_class,
    jordan_heights,
    model_evaluator,
    survey_small_set,
    vh_eigenclasses,
    weil_height,
)

SQ = power_map(2)
SQ_CUBE = power_map(2, 3)
SWAP = build_system(k=2, perm=[1, 0], components=[((1, 0), (0, 1)), ((1, 0, 0), (0, 0, 1))])
PREPERIODIC = {(0, 1), (1, 0), (1, 1), (-1, 1)}


def pt(*vals):
    return ProjPoint.affine(*vals)


def close(a, b, tol=1e-12):
    return abs(float(a) - float(b)) <= tol


# --- Weil heights --------------------------------------------------------------


def test_weil_height_examples():
    assert close(weil_height(ProjPoint(((3, 5),))).value, math.log(5))
    assert close(height_for_class((1, 1), pt(2, 3)).value, math.log(6))
    assert close(weil_height(ProjPoint(((4, 6),))).value, math.log(3))
    assert weil_height(pt(1), plus=True).value == 1


@given(st.integers(-10**30, 10**30), st.integers(1, 10**30))
def test_log_height_matches_exact_digits(x, y):
    g = math.gcd(x, y)
    v = weil_height(ProjPoint(((x, y),))).value
    with mpmath.workprec(200):
        ref = mpmath.log(max(abs(x // g), y // g))
        assert abs(v - ref) < mpmath.mpf(2) ** -120 * max(1, ref)


# --- canonical heights ---------------------------------------------------------


def test_canonical_height_examples():
    assert close(canonical_height(SQ, (1,), pt(2), n_max=10).value, math.log(2))
    assert canonical_height(SQ, (1,), pt(1)).value == 0
    hv = canonical_height(SQ_CUBE, (0, 1), pt(7, 2), n_max=10)
    assert close(hv.value, math.log(2))
    assert hv.provenance == "limit-estimate" and hv.n_used == 10


def test_canonical_height_rejects_non_eigenclass():
    with pytest.raises(NotAnEigenclass):
        canonical_height(SQ_CUBE, (1, 1), pt(2, 2))
    with pytest.raises(NotAnEigenclass):
        eigenvalue_of_class(SWAP, (1, 0))
    with pytest.raises(NotAnEigenclass):
        canonical_height(power_map(1), (1,), pt(2))


def test_canonical_height_truncation():
    hv = canonical_height(SQ, (1,), pt(3), n_max=30, digit_budget=100)
    assert hv.truncated and hv.n_used < 30
    with pytest.raises(BudgetExceeded) as e:
        canonical_height(SQ, (1,), pt(3), n_max=30, digit_budget=100, strict=True)
    assert e.value.best_effort.n_used == hv.n_used


@given(st.integers(-60, 60), st.integers(1, 60))
def test_functional_equation_and_bounded_difference(p, q):
    P = ProjPoint(((p, q),))
    h = canonical_height(SQ, (1,), P, n_max=12)
    h_image = canonical_height(SQ, (1,), SQ.apply(P), n_max=12)
    assert abs(float(h_image.value) - 2 * float(h.value)) <= 10 * float(h.residual) + 1e-12
    assert abs(h.value - weil_height(P).value) <= math.log(2) + 1e-6


def test_non_monic_map_has_bounded_height_difference():
    # f = [x^2 + y^2 : xy]; hat-h - h stays bounded
    f = build_system(k=1, components=[((1, 0, 1), (0, 1, 0))])
    gaps = [
        abs(float(canonical_height(f, (1,), P, n_max=10).value - weil_height(P).value))
        for P in rational_points(1, 30)
    ]
    assert max(gaps) < 2.0


# --- Jordan blocks -------------------------------------------------------------


def test_jordan_m1_reduces_to_canonical_height():
    # the law check reads one step past the estimation depth
    ev = model_evaluator(SQ, [(1,)], pt(5), 13)
    j = jordan_heights(2, 1, ev, n_max=13)
    ref = canonical_height(SQ, (1,), pt(5), n_max=12)
    assert abs(j[0].value - ref.value) < mpmath.mpf(10) ** -30


def test_jordan_noisy_lambda2_m2():
    gen = PlantedJordanBlock(2, [1.5, -0.75], noise=0.1, seed=7)
    out = jordan_heights(2, 2, gen, n_max=40)
    for k in range(2):
        assert abs(out[k].value - gen.planted[k]) < 1e-6
        assert out.law_residuals[k] < 1e-6


def test_jordan_zero_noise_lambda3_m3():
    gen = PlantedJordanBlock(3, [2, -1, 0.5])
    out = jordan_heights(3, 3, gen, n_max=20)
    for k in range(3):
        assert abs(out[k].value - gen.planted[k]) < 1e-10


@settings(max_examples=40)
@given(
    st.sampled_from([2, 3]),
    st.integers(1, 4),
    st.lists(st.floats(-5, 5, allow_nan=False), min_size=4, max_size=4),
    st.floats(0, 1),
    st.integers(0, 2**32),
)
def test_planted_block_recovered_at_depth_60(lam, m, planted, noise, seed):
    gen = PlantedJordanBlock(lam, planted[:m], noise=noise, seed=seed)
    out = jordan_heights(lam, m, gen, n_max=61)
    for k in range(m):
        assert abs(out[k].value - gen.planted[k]) < 1e-8
        assert out.law_residuals[k] < 1e-8


def test_divergent_evaluator_is_detected():
    with pytest.raises(DivergenceDetected):
        jordan_heights(2, 1, lambda i, n: mpmath.mpf(3) ** n, n_max=20)


# --- arithmetic degree ---------------------------------------------------------


def test_arithmetic_degree_examples():
    est = arithmetic_degree(SQ_CUBE, pt(2, 2), n_max=12)
    assert abs(est.ratio - 3) < 0.05 and abs(est.tail_root - 3) < 0.05 and est.converged
    est = arithmetic_degree(SQ, pt(0), n_max=10)
    assert est.ratio == 1 and est.tail_root == 1
    est = arithmetic_degree(SWAP, pt(2, 3), n_max=30)
    assert abs(est.tail_root - math.sqrt(2)) < 0.05 and est.converged


def test_raw_root_converges_slowly():
    est = arithmetic_degree(SQ_CUBE, pt(2, 2), n_max=12)
    assert est.root < est.tail_root
    assert abs(est.root - 3) > 0.05


# --- classification ------------------------------------------------------------


def test_vh_eigenclasses():
    basis, classes = vh_eigenclasses(SQ_CUBE, (1, 1))
    assert len(basis) == 2
    assert [(c.eigenvalue, c.divisor) for c in classes] == [(3, (0, 1)), (2, (1, 0))]
    _, classes = vh_eigenclasses(SQ_CUBE, (1, 0))
    assert [(c.eigenvalue, c.divisor) for c in classes] == [(2, (1, 0))]


@pytest.mark.parametrize(
    "P, alpha, index",
    [((2, 1), 2.0, 1), ((1, 2), 3.0, 0), ((1, 1), 1.0, None), ((Fraction(3, 5), 0), 2.0, 1)],
)
def test_classify_examples(P, alpha, index):
    r = classify_point(SQ_CUBE, (1, 1), pt(*P))
    assert r.alpha == alpha and r.smallest_nonzero_index == index
    assert r.alpha <= r.lambda1 + 0.05
    assert r.cross_check_ok in (True, None)


def test_swap_square_classification_uses_v_h():
    f = compose(SWAP, SWAP)
    _, classes = vh_eigenclasses(f, (1, 1))
    assert [(c.eigenvalue, c.divisor) for c in classes] == [(2, (1, 1))]
    r = classify_point(f, (1, 1), pt(2, 3))
    assert r.alpha == 2.0 and r.cross_check_ok
    with pytest.raises(NotDiagonalizable):
        vh_eigenclasses(SWAP, (1, 1))


def test_threshold_ambiguity_is_flagged():
    # hat-h of [2:1] under x^2 is log 2; a threshold near it falls in the band
    with pytest.raises(ThresholdAmbiguous) as e:
        classify_point(SQ, (1,), pt(2), tau=0.5, cross_check=False)
    assert e.value.record.point == pt(2)


@settings(max_examples=30)
@given(st.fractions(-20, 20, max_denominator=20), st.fractions(-20, 20, max_denominator=20))
def test_alpha_matches_closed_form(x, y):
    r = classify_point(SQ_CUBE, (1, 1), pt(x, y), n_max=12, digit_budget=20000)
    xp = (x.numerator, x.denominator) in PREPERIODIC
    yp = (y.numerator, y.denominator) in PREPERIODIC
    expected = 1.0 if xp and yp else 2.0 if yp else 3.0
    assert r.alpha == expected


# --- surveys -------------------------------------------------------------------


@pytest.fixture(scope="module")
def survey10():
    return survey_small_set(SQ_CUBE, (1, 1), 10)


def test_survey_power_map_bound_10(survey10):
    rep = survey10
    assert rep.counts["G"] == 16
    assert {tuple(r.point.coords) for r in rep.records if r.in_G} == {
        (a, b) for a in PREPERIODIC for b in PREPERIODIC
    }
    assert all(r.alpha == 1.0 for r in rep.records if r.in_G)
    assert rep.invariance_violations == 0 and not rep.ambiguous
    assert rep.csv_rows()[0][0] == "point" and rep.csv_rows()[0][-1] == "in_G"


def test_survey_square_bound_100():
    rep = survey_small_set(SQ, (1,), 100)
    assert rep.counts["B"] / rep.counts["total"] >= 0.9
    assert rep.alpha_equals_lambda1 >= 0.9


def test_survey_parallel_matches_serial():
    a = survey_small_set(SQ_CUBE, (1, 1), 6)
    b = survey_small_set(SQ_CUBE, (1, 1), 6, workers=2)
    assert a.summary() == b.summary()
    assert a.csv_rows() == b.csv_rows()


def test_g_points_have_finite_orbits(survey10):
    for r in survey10.records:
        if r.in_G:
            orb = iterate(SQ_CUBE, r.point, 4)
            assert len(set(orb.points)) <= 3
