"""Acceptance criteria; each test prints one PASS/FAIL line to the terminal."""
import math
import random
from fractions import Fraction

import numpy
import pytest
import sympy

from arithdyn.atiyah import (
    AtiyahExpr,
    IitakaVerdict,
    Pic0Group,
    anticanonical_h0,
    atiyah_sym,
    atiyah_tensor,
    det_bundle,
    h0,
    iitaka_estimate,
)
from arithdyn.cones import (
    DilationVerdict,
    canonicalize,
    dilation_criterion,
    ray_count_criterion,
)
from arithdyn.dynsys import (
    Orbit,
    build_system,
    iterate,
    power_map,
    pullback_section,
    rational_points,
    relative_degree_check,
    resultant,
    section_pullback_matrix,
    section_space,
)
from arithdyn.errors import ContradictionDetected, PreconditionViolated
from arithdyn.exactlin import IntMatrix, integral_eigendivisor
from arithdyn.heights import (
    PlantedJordanBlock,
    canonical_height,
    classify_point,
    jordan_heights,
    survey_small_set,
    weil_height,
)
from oracles import unimodular

SEED = 20240601
SQ = power_map(2)
SQ_CUBE = power_map(2, 3)
PREPERIODIC = {(0, 1), (1, 0), (1, 1), (-1, 1)}
TRIVIAL = Pic0Group.free("L").trivial
HEPTAGON = [(0, 0, 1), (2, 0, 1), (4, 1, 1), (5, 3, 1), (4, 5, 1), (1, 5, 1), (-1, 2, 1)]


@pytest.fixture
def report(capsys):
    def emit(n, ok, detail):
        with capsys.disabled():
            print(f"\nACCEPTANCE {n:>2} {'PASS' if ok else 'FAIL'}: {detail}")
        assert ok, detail

    return emit


def sample(points, n, salt):
    rng = random.Random(f"{SEED}:{salt}")
    return rng.sample(points, min(n, len(points)))


def m(rows):
    return IntMatrix(tuple(tuple(r) for r in rows))


# --- 1, 2: canonical heights ---------------------------------------------------


def functional_gap(f, D, lam, orbit, n_max=15):
    # the orbit of f(P) is the orbit of P shifted by one step
    h = canonical_height(f, D, orbit[0], n_max=n_max - 1, orbit=orbit)
    shifted = Orbit(orbit.points[1:], orbit.truncated)
    h_image = canonical_height(f, D, orbit[1], n_max=n_max - 1, orbit=shifted)
    return abs(float(h_image.value) - lam * float(h.value)), max(h.n_used, h_image.n_used + 1)


def test_criterion_1_functional_equation(report):
    worst, depth = 0.0, 0
    pts1 = sample(rational_points(1, 50), 200, "c1-1")
    for P in pts1:
        g, n = functional_gap(SQ, (1,), 2, iterate(SQ, P, 15))
        worst, depth = max(worst, g), max(depth, n)
    pts2 = sample(rational_points(2, 50), 200, "c1-2")
    for P in pts2:
        orbit = iterate(SQ_CUBE, P, 15, digit_budget=50_000)
        for D, lam in (((1, 0), 2), ((0, 1), 3)):
            g, n = functional_gap(SQ_CUBE, D, lam, orbit)
            worst, depth = max(worst, g), max(depth, n)
    ok = worst <= 1e-6 and depth <= 15 and len(pts1) == len(pts2) == 200
    report(1, ok, f"max |hhat(fP) - lam hhat(P)| = {worst:.3g} over 2x200 points, n <= {depth}")


def test_criterion_2_bounded_difference(report):
    pts = sample(rational_points(1, 50), 200, "c1-1")
    sup = max(abs(float(canonical_height(SQ, (1,), P).value - weil_height(P).value)) for P in pts)
    report(2, sup <= math.log(2) + 1e-6, f"sup |hhat - h| = {sup:.3g} (bound log 2 = {math.log(2):.6f})")


# --- 3: Jordan recursion -------------------------------------------------------


def test_criterion_3_jordan_recursion(report):
    rng = random.Random(f"{SEED}:c3")
    worst_value, worst_law, cases = 0.0, 0.0, 0
    for lam in (2, 3):
        for size in range(1, 5):
            for _ in range(5):
                planted = [rng.uniform(-5, 5) for _ in range(size)]
                gen = PlantedJordanBlock(lam, planted, noise=0.1, seed=rng.getrandbits(32))
                # estimates at n = 60; the law check reads one step further
                out = jordan_heights(lam, size, gen, n_max=61)
                for k in range(size):
                    worst_value = max(worst_value, abs(float(out[k].value) - planted[k]))
                    worst_law = max(worst_law, float(out.law_residuals[k]))
                cases += 1
    ok = worst_value <= 1e-6 and worst_law <= 1e-6
    report(3, ok, f"{cases} planted blocks: value error {worst_value:.3g}, law residual {worst_law:.3g}")


# --- 4, 5: classification and G ------------------------------------------------


def closed_form_alpha(P):
    xp, yp = (c in PREPERIODIC for c in P.coords)
    return 1.0 if xp and yp else 2.0 if yp else 3.0


@pytest.fixture(scope="module")
def classified():
    pts = sample(rational_points(2, 50, norm="max"), 200, "c4")
    return [classify_point(SQ_CUBE, (1, 1), P, n_max=12, digit_budget=20000) for P in pts]


def test_criterion_4_classification(report, classified):
    mismatches = sum(r.alpha != closed_form_alpha(r.point) for r in classified)
    over = sum(r.alpha > r.lambda1 + 0.05 for r in classified)
    frac = sum(r.alpha == r.lambda1 for r in classified) / len(classified)
    cross = [r.cross_check_ok for r in classified if r.cross_check_ok is not None]
    ok = mismatches == 0 and over == 0 and frac >= 0.9 and all(cross)
    report(
        4, ok,
        f"{len(classified)} points: {mismatches} closed-form mismatches, {over} above lambda1, "
        f"alpha = lambda1 fraction {frac:.3f}, {len(cross)} arithmetic-degree cross-checks agree",
    )


def test_criterion_5_g_invariance(report, classified):
    survey = survey_small_set(SQ_CUBE, (1, 1), 10)
    G = [r.point for r in survey.records if r.in_G] + [r.point for r in classified if r.in_G]
    violations = sum(
        not classify_point(SQ_CUBE, (1, 1), SQ_CUBE.apply(P), cross_check=False).in_G for P in G
    )
    violations += survey.invariance_violations
    report(5, violations == 0 and len(G) >= 16, f"{len(G)} G-points checked, {violations} violations")


# --- 6: cone criteria ----------------------------------------------------------


def cone_instances(rng):
    out = []
    while len(out) < 180:
        n = rng.choice([2, 3])
        ops = [(rng.randrange(n), rng.randrange(n), rng.randint(-2, 2)) for _ in range(rng.randint(0, 4))]
        P, Pinv = unimodular(n, ops)
        kind = rng.choice(["scalar", "diag", "perm", "random"])
        if kind == "scalar":
            c = rng.randint(1, 4)
            N = [[c * (i == j) for j in range(n)] for i in range(n)]
        elif kind == "diag":
            N = [[rng.randint(1, 4) * (i == j) for j in range(n)] for i in range(n)]
        elif kind == "perm":
            perm = list(range(n))
            rng.shuffle(perm)
            d = [rng.randint(1, 3) for _ in range(n)]
            N = [[d[i] * (perm[i] == j) for j in range(n)] for i in range(n)]
        else:
            N = [[rng.randint(0, 3) for _ in range(n)] for _ in range(n)]
        M = m(P) @ m(N) @ m(Pinv)
        if M.det() == 0:
            continue
        out.append((M, canonicalize([tuple(P[i][j] for i in range(n)) for j in range(n)])))
    hept = canonicalize(HEPTAGON)
    for c in range(1, 21):
        out.append((IntMatrix.scalar(3, c), hept))
    return out


def numeric_dilation(M):
    w, V = numpy.linalg.eig(numpy.array(M.rows, dtype=float))
    if abs(numpy.linalg.det(V)) < 1e-8:
        return False
    return bool(numpy.ptp(w.real) < 1e-9 and numpy.all(abs(w.imag) < 1e-9) and w.real[0] > 0)


def test_criterion_6_cone_criteria(report):
    rng = random.Random(f"{SEED}:c6")
    instances = cone_instances(rng)
    disagree = inconclusive = contradictions = silent = 0
    for M, C in instances:
        r = dilation_criterion(M, C)
        if r.verdict is DilationVerdict.INCONCLUSIVE:
            inconclusive += 1
        elif (r.verdict is DilationVerdict.DILATION) != numeric_dilation(M):
            disagree += 1
        try:
            ray_count_criterion(M, C)
        except ContradictionDetected:
            contradictions += 1
        except PreconditionViolated:
            silent += 1
    swap = m([[0, 2], [1, 0]])
    Q2 = canonicalize([(1, 0), (0, 1)])
    pattern = (
        dilation_criterion(swap, Q2).verdict is DilationVerdict.NOT_DILATION
        and dilation_criterion(swap @ swap, Q2).verdict is DilationVerdict.DILATION
    )
    ok = len(instances) == 200 and disagree == 0 and contradictions == 0 and pattern
    report(
        6, ok,
        f"{len(instances)} instances: {disagree} oracle disagreements, {inconclusive} inconclusive, "
        f"{contradictions} contradictions ({silent} outside ray-count preconditions), swap pattern {pattern}",
    )


# --- 7: Picard-2 eigendivisors -------------------------------------------------


def test_criterion_7_picard2_eigendivisor(report):
    rng = random.Random(f"{SEED}:c7")
    bad = 0
    for _ in range(100):
        lam, mu = rng.sample(range(-30, 31), 2)
        b = rng.randint(-50, 50)
        M = m([[lam, 0], [b, mu]])
        v = integral_eigendivisor(M, lam, mu)
        bad += v != (lam - mu, b) or M @ v != (lam * v[0], lam * v[1])
    report(7, bad == 0, f"100 triangular matrices, {bad} failures of M v = lam v with v = (lam - mu, b)")


# --- 8: Atiyah bundles ---------------------------------------------------------


def test_criterion_8_atiyah(report):
    failures = []
    for r in range(1, 9):
        for s in range(1, 9):
            E = atiyah_tensor(r, s)
            if E.rank != r * s or not det_bundle(E).is_trivial:
                failures.append(f"F{r}xF{s}")
    for d in range(0, 9):
        for r in range(1, 9):
            E = atiyah_sym(d, r)
            if E.rank != math.comb(d + r - 1, r - 1) or not det_bundle(E).is_trivial:
                failures.append(f"Sym{d}F{r}")
    for r in range(1, 11):
        if [t for t, _ in atiyah_sym(r - 1, 2).terms] != [r]:
            failures.append(f"Sym{r - 1}F2")
        if h0(AtiyahExpr.of((r, TRIVIAL))) != 1:
            failures.append(f"h0 F{r}")
    rng = random.Random(f"{SEED}:c8")
    G = Pic0Group(("A", "B", "T"), (0, 0, 3))
    checked = 0
    while checked < 100:
        n = rng.randint(1, 3)
        ranks = [rng.randint(1, 3) for _ in range(n)]
        if sum(ranks) > 6:
            continue
        terms = [(ranks[0], G.trivial)] + [
            (r, G.element({g: rng.randint(-2, 2) for g in G.names})) for r in ranks[1:]
        ]
        E = AtiyahExpr(tuple(terms))
        if anticanonical_h0(E, 1) < 1:
            failures.append(E.format(G))
        checked += 1
    free = Pic0Group.free("L")
    est = iitaka_estimate(AtiyahExpr.of((2, free.trivial), (1, free.gen("L"))), 6)
    if est.sequence != (1,) * 6 or est.verdict is not IitakaVerdict.KAPPA0:
        failures.append(f"F2+L sequence {est.sequence}")
    report(
        8, not failures,
        f"tensor/sym invariants r,s,d <= 8, Sym^(r-1)F2 = F_r for r <= 10, {checked} random E with h0(-K) >= 1, "
        f"F2+L h0(-mK) = {list(est.sequence)}; failures: {failures[:5]}",
    )


# --- 9, 10: split systems and sections -----------------------------------------


def random_form_pair(rng, d):
    while True:
        F = tuple(rng.randint(-3, 3) for _ in range(d + 1))
        G = tuple(rng.randint(-3, 3) for _ in range(d + 1))
        if resultant(F, G) != 0:
            return F, G


def random_split_system(rng):
    k = rng.randint(2, 4)
    s = rng.randint(1, k - 1)
    S = sorted(rng.sample(range(k), s))
    T = [i for i in range(k) if i not in S]
    perm = [0] * k
    for block in (S, T):
        image = block[:]
        rng.shuffle(image)
        for i, j in zip(block, image):
            perm[i] = j
    comps = [random_form_pair(rng, rng.randint(1, 4)) for _ in range(k)]
    return build_system(k=k, perm=perm, components=comps), S


def test_criterion_9_relative_degree(report):
    rng = random.Random(f"{SEED}:c9")
    width = Fraction(1, 10**6)
    bad = 0
    for _ in range(50):
        f, S = random_split_system(rng)
        r = relative_degree_check(f, S, width)
        top = max(abs(numpy.linalg.eigvals(numpy.array(f.pullback.rows, dtype=float))))
        bad += not r.agrees or not (float(r.radius[0]) - 1e-9 <= top <= float(r.radius[1]) + 1e-9)
    report(9, bad == 0, f"50 split systems, {bad} failures at certified width {float(width):g}")


def test_criterion_10_section_injectivity(report):
    rng = random.Random(f"{SEED}:c10")
    bad = checked = 0
    while checked < 50:
        f, _ = random_split_system(rng)
        D = tuple(rng.randint(0, 2) for _ in range(f.k))
        n = section_space(D).dim
        if n == 0 or n > 40:
            continue
        A = section_pullback_matrix(f, D)
        bad += sympy.Matrix(A).rank() != n or not pullback_section(f, D, [1] * n).injective
        checked += 1
    report(10, bad == 0, f"{checked} (system, D) pairs, {bad} rank-deficient substitution matrices")


def test_height_reading_for_criterion_4_is_recorded(capsys):
    # informational: the product-height reading of the bound gives a smaller fraction
    pts = sample(rational_points(2, 50), 200, "c4-sum")
    frac = sum(closed_form_alpha(P) == 3.0 for P in pts) / len(pts)
    with capsys.disabled():
        print(f"\nINFO alpha = lambda1 fraction under the product-height bound: {frac:.3f}")
    assert 0 < frac < 1
