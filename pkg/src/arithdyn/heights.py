"""Weil and canonical heights on the (P^1)^k model family.

Logarithms of large integers are the only inexact step; they are taken with
mpmath at a fixed binary precision (128 bits unless told otherwise).
"""
from __future__ import annotations

import math
import random
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import mpmath

from .dynsys import (
    DEFAULT_DIGIT_BUDGET,
    DivisorClass,
    ModelSystem,
    Orbit,
    OrbitCache,
    ProjPoint,
    iterate,
    rational_points,
)
from .errors import BudgetExceeded, DivergenceDetected, NotAnEigenclass, NotDiagonalizable, ThresholdAmbiguous
from .exactlin import IntMatrix, krylov_basis, primitive, rational_spectrum, restrict, eigenspace

DEFAULT_PREC = 128
ZERO_THRESHOLD = 1e-8

EXACT = "exact-from-integers"
LIMIT = "limit-estimate"


@dataclass(frozen=True)
class HeightValue:
    value: mpmath.mpf
    provenance: str = EXACT
    n_used: int | None = None
    residual: mpmath.mpf | None = None
    truncated: bool = False
    functional_residual: mpmath.mpf | None = None

    def __float__(self):
        return float(self.value)

    def to_dict(self) -> dict:
        d = {"value": float(self.value), "provenance": self.provenance}
        if self.provenance == LIMIT:
            d.update(
                n_used=self.n_used,
                residual=float(self.residual),
                truncated=self.truncated,
                functional_residual=None if self.functional_residual is None else float(self.functional_residual),
            )
        return d


def _multidegree(D) -> tuple[int, ...]:
    return D.multidegree if isinstance(D, DivisorClass) else tuple(int(a) for a in D)


def log_naive(x: int, y: int):
    m = max(abs(x), abs(y))
    return mpmath.mpf(0) if m == 1 else mpmath.log(m)


def height_for_class(D, P: ProjPoint, prec: int = DEFAULT_PREC, plus: bool = False) -> HeightValue:
    """h_D(P) = sum_i a_i log max(|x_i|, |y_i|)."""
    a = _multidegree(D)
    if len(a) != P.k:
        raise ValueError("class and point live on different products")
    with mpmath.workprec(prec):
        h = mpmath.fsum(ai * log_naive(x, y) for ai, (x, y) in zip(a, P.coords) if ai)
        if plus:
            h = max(mpmath.mpf(1), h)
        return HeightValue(+h)


def weil_height(P: ProjPoint, prec: int = DEFAULT_PREC, plus: bool = False) -> HeightValue:
    return height_for_class((1,) * P.k, P, prec, plus)


def eigenvalue_of_class(f: ModelSystem, D) -> Fraction:
    """The exact lambda with f^* D = lambda D, or NotAnEigenclass."""
    a = _multidegree(D)
    if not any(a):
        raise NotAnEigenclass("the zero class is not an eigenclass")
    img = f.pullback @ a
    i = next(i for i, x in enumerate(a) if x)
    lam = Fraction(img[i], a[i])
    if any(Fraction(y) != lam * x for x, y in zip(a, img)):
        raise NotAnEigenclass(f"f^*{list(a)} = {list(img)} is not a multiple of {list(a)}")
    return lam


def canonical_height(
    f: ModelSystem,
    D,
    P: ProjPoint,
    n_max: int = 15,
    prec: int = DEFAULT_PREC,
    digit_budget: int = DEFAULT_DIGIT_BUDGET,
    orbit: Orbit | None = None,
    strict: bool = False,
) -> HeightValue:
    """lim h_D(f^n P) / lambda^n for an eigenclass D with |lambda| > 1.

    The value is taken at the deepest affordable n <= n_max.  The residual is
    the Cauchy-tail bound |v_N - v_{N-1}| / (|lambda| - 1) for a geometric
    tail of ratio 1/|lambda|; ``functional_residual`` is |lambda v_{N-1} - lambda v_N|,
    the gap in hat-h(fP) = lambda hat-h(P) at the same depth.
    """
    lam = eigenvalue_of_class(f, D)
    if abs(lam) <= 1:
        raise NotAnEigenclass(f"eigenvalue {lam} is not of modulus > 1")
    if orbit is None:
        orbit = iterate(f, P, n_max, digit_budget)
    else:
        orbit = Orbit(orbit.points[: n_max + 1], orbit.truncated and len(orbit) <= n_max + 1)
    a = _multidegree(D)
    with mpmath.workprec(prec):
        l = mpmath.mpf(lam.numerator) / lam.denominator
        vals = []
        scale = mpmath.mpf(1)
        for Q in orbit.points:
            vals.append(height_for_class(a, Q, prec).value / scale)
            scale *= l
        N = len(vals) - 1
        value = vals[-1]
        if N >= 1:
            diff = abs(vals[-1] - vals[-2])
            residual = diff / (abs(l) - 1)
            functional = abs(l) * diff
        else:
            residual = mpmath.inf
            functional = mpmath.inf
    hv = HeightValue(value, LIMIT, N, residual, orbit.truncated, functional)
    if strict and orbit.truncated:
        raise BudgetExceeded(f"digit budget reached after {N} iterations", best_effort=hv)
    return hv


# ---------------------------------------------------------------------------
# Jordan blocks


@dataclass(frozen=True)
class JordanHeights:
    lam: mpmath.mpf
    values: tuple[HeightValue, ...]
    values_at_image: tuple[mpmath.mpf, ...]
    law_residuals: tuple[mpmath.mpf, ...]

    def __getitem__(self, i):
        return self.values[i]

    def __len__(self):
        return len(self.values)


def _recursion(lam, m: int, h: Callable[[int, int], mpmath.mpf], n: int) -> list:
    """hat-h_k = lambda^-n h_k(f^n x) - sum_{i=1..k} C(n, i) lambda^-i hat-h_{k-i}(x)."""
    out = []
    lam_n = lam**n
    for k in range(m):
        v = h(k, n) / lam_n
        for i in range(1, k + 1):
            v -= math.comb(n, i) * out[k - i] / lam**i
        out.append(v)
    return out


def jordan_heights(
    lam,
    m: int,
    evaluator: Callable[[int, int], object],
    n_max: int = 60,
    prec: int = DEFAULT_PREC,
    tol: float = 1e-6,
) -> JordanHeights:
    """Canonical heights for a Jordan block D_0..D_{m-1} of eigenvalue lam.

    ``evaluator(i, n)`` returns h_{D_i}(f^n x); it is queried for n up to
    ``n_max``.  Heights at x use depth n_max - 1 and heights at f(x) use the
    shifted evaluator, so the transformation law
    hat-h_i(f x) = lam hat-h_i(x) + hat-h_{i-1}(x) is checked on independent
    estimates.
    """
    if m < 1:
        raise ValueError("block size must be positive")
    with mpmath.workprec(prec):
        lam = mpmath.mpf(lam) if not isinstance(lam, Fraction) else mpmath.mpf(lam.numerator) / lam.denominator
        if abs(lam) <= 1:
            raise ValueError("Jordan-block canonical heights need |lambda| > 1")
        cache: dict[tuple[int, int], mpmath.mpf] = {}

        def h(i, n):
            if (i, n) not in cache:
                cache[(i, n)] = mpmath.mpf(evaluator(i, n))
            return cache[(i, n)]

        N = n_max - 1
        est = [_recursion(lam, m, h, n) for n in (N - 2, N - 1, N)]
        at_x = est[-1]
        at_fx = _recursion(lam, m, lambda i, n: h(i, n + 1), N)
        values = []
        for k in range(m):
            d1 = abs(est[1][k] - est[0][k])
            d2 = abs(est[2][k] - est[1][k])
            if d2 > d1 and d2 > tol:
                raise DivergenceDetected(
                    f"block index {k}: successive differences grow ({float(d1):.3g} -> {float(d2):.3g})"
                )
            residual = d2 * abs(lam) / (abs(lam) - 1)
            values.append(HeightValue(at_x[k], LIMIT, N, residual))
        law = []
        for k in range(m):
            prev = at_x[k - 1] if k else 0
            law.append(abs(at_fx[k] - lam * at_x[k] - prev))
        for k, hv in enumerate(values):
            object.__setattr__(hv, "functional_residual", law[k])
    return JordanHeights(lam, tuple(values), tuple(at_fx), tuple(law))


@dataclass
class PlantedJordanBlock:
    """Synthetic height system obeying the Jordan-block functional equations.

    ``planted[i]`` is hat-h_{D_i}(x).  Along the formal orbit the canonical
    values are hat-h_i(f^n x) = sum_j C(n, j) lam^(n-j) planted[i-j]; the
    exposed Weil heights add a deterministic perturbation in [-noise, noise].
    """

    lam: Fraction | int
    planted: Sequence
    noise: float = 0.0
    seed: int = 0
    prec: int = DEFAULT_PREC

    @property
    def m(self) -> int:
        return len(self.planted)

    def canonical(self, i: int, n: int):
        with mpmath.workprec(self.prec):
            lam = mpmath.mpf(Fraction(self.lam).numerator) / Fraction(self.lam).denominator
            return mpmath.fsum(
                math.comb(n, j) * lam ** (n - j) * mpmath.mpf(self.planted[i - j]) for j in range(i + 1)
            )

    def noise_at(self, i: int, n: int) -> float:
        if not self.noise:
            return 0.0
        return random.Random(f"{self.seed}:{i}:{n}").uniform(-self.noise, self.noise)

    def __call__(self, i: int, n: int):
        with mpmath.workprec(self.prec):
            return self.canonical(i, n) + self.noise_at(i, n)


def model_evaluator(
    f: ModelSystem,
    classes: Sequence,
    P: ProjPoint,
    n_max: int,
    prec: int = DEFAULT_PREC,
    digit_budget: int = DEFAULT_DIGIT_BUDGET,
) -> Callable[[int, int], mpmath.mpf]:
    """Evaluator h_{D_i}(f^n P) backed by an orbit of a model system."""
    orbit = iterate(f, P, n_max, digit_budget)

    def ev(i, n):
        if n >= len(orbit):
            raise BudgetExceeded(f"orbit only reaches n={len(orbit) - 1}")
        return height_for_class(classes[i], orbit[n], prec).value

    return ev


# ---------------------------------------------------------------------------
# arithmetic degree


@dataclass(frozen=True)
class ArithmeticDegreeEstimate:
    heights: tuple[float, ...]
    root_sequence: tuple[float, ...]
    root: float
    tail_root: float
    ratio: float
    n_used: int
    truncated: bool
    agree: bool
    converged: bool
    extrapolated: float | None = None

    @property
    def estimate(self) -> float:
        return self.extrapolated if self.converged else self.ratio

    def to_dict(self) -> dict:
        return {
            "n_used": self.n_used,
            "truncated": self.truncated,
            "root": self.root,
            "tail_root": self.tail_root,
            "ratio": self.ratio,
            "extrapolated": self.extrapolated,
            "agree": self.agree,
            "converged": self.converged,
        }


def arithmetic_degree(
    f: ModelSystem,
    P: ProjPoint,
    n_max: int = 30,
    digit_budget: int = DEFAULT_DIGIT_BUDGET,
    prec: int = DEFAULT_PREC,
    orbit: Orbit | None = None,
    agreement: float = 0.05,
) -> ArithmeticDegreeEstimate:
    """Estimate alpha_f(P) = lim h^+(f^n P)^(1/n) from an orbit prefix.

    Three readings at the deepest n: the raw root h^+_N^(1/N) (converges
    like C^(1/N)), the tail root (h^+_N / h^+_{N-2})^(1/2) which cancels the
    constant and averages period-2 oscillation, and the successive ratio
    h^+_N / h^+_{N-1}.  ``agree`` compares the ratio with the tail root.
    The tail roots are also Aitken-extrapolated; ``converged`` means two
    successive extrapolates differ by at most half the tolerance.
    """
    if orbit is None:
        orbit = iterate(f, P, n_max, digit_budget)
    with mpmath.workprec(prec):
        hs = [weil_height(Q, prec, plus=True).value for Q in orbit.points]
        N = len(hs) - 1
        roots = [float(hs[n] ** (mpmath.mpf(1) / n)) for n in range(1, N + 1)]
        if N == 0:
            return ArithmeticDegreeEstimate((float(hs[0]),), (), 1.0, 1.0, 1.0, 0, orbit.truncated, True, False)
        ratio = float(hs[N] / hs[N - 1])
        tails = [float(mpmath.sqrt(hs[n] / hs[n - 2])) for n in range(max(2, N - 3), N + 1)]
        tail = tails[-1] if N >= 2 else ratio
    agree = abs(ratio - tail) <= agreement
    extrapolated, converged = None, False
    if len(tails) == 4:
        a, b = _aitken(tails[:3]), _aitken(tails[1:])
        if b is not None:
            extrapolated = b
            converged = a is not None and abs(a - b) <= agreement / 2
    return ArithmeticDegreeEstimate(
        tuple(float(h) for h in hs), tuple(roots), roots[-1], tail, ratio, N, orbit.truncated, agree, converged,
        extrapolated,
    )


def _aitken(t: Sequence[float]) -> float | None:
    # limit of a geometrically converging triple; None when the drift does not contract
    d1, d2 = t[1] - t[0], t[2] - t[1]
    if d2 == 0:
        return t[2]
    if d1 == 0 or abs(d2) >= abs(d1):
        return None
    q = d2 / d1
    return t[2] + d2 * q / (1 - q)


# ---------------------------------------------------------------------------
# classification


@dataclass(frozen=True)
class Eigenclass:
    eigenvalue: Fraction
    divisor: tuple[int, ...]


def vh_eigenclasses(f: ModelSystem, H: Sequence[int]) -> tuple[list[tuple[int, ...]], list[Eigenclass]]:
    """V_H basis and the eigenclasses of f^* on V_H, sorted by decreasing modulus.

    V_H is cyclic (spanned by the pullbacks of H), so in the Krylov basis the
    restriction is an integer companion matrix with simple geometric
    multiplicities.
    """
    M = f.pullback
    basis = krylov_basis(M, H)
    R = restrict(M, basis)
    if any(x.denominator != 1 for r in R for x in r):
        raise AssertionError("Krylov restriction of an integer matrix must be integral")
    RI = IntMatrix(tuple(tuple(int(x) for x in r) for r in R))
    spec = rational_spectrum(RI)
    if not spec.all_rational:
        raise NotDiagonalizable("f^* on V_H has irrational eigenvalues")
    classes = []
    for e in spec.entries:
        if e.jordan_block_sizes != (1,) * e.algebraic_multiplicity:
            raise NotDiagonalizable(f"eigenvalue {e.value} has Jordan blocks {e.jordan_block_sizes}")
        for c in eigenspace(RI, e.value):
            D = primitive([sum(c[j] * basis[j][t] for j in range(len(basis))) for t in range(M.n)])
            first = next(x for x in D if x)
            if first < 0:
                D = tuple(-x for x in D)
            classes.append(Eigenclass(e.value, D))
    return basis, classes


@dataclass(frozen=True)
class ClassificationRecord:
    point: ProjPoint
    block_heights: tuple[tuple[str, HeightValue], ...]
    alpha: float
    certainty: str
    smallest_nonzero_index: int | None
    lambda1: float
    cross_check: ArithmeticDegreeEstimate | None = None
    cross_check_ok: bool | None = None

    @property
    def in_G(self) -> bool:
        return self.smallest_nonzero_index is None

    def to_dict(self) -> dict:
        d = {
            "point": str(self.point),
            "block_heights": {label: hv.to_dict() for label, hv in self.block_heights},
            "alpha": self.alpha,
            "certainty": self.certainty,
            "smallest_nonzero_index": self.smallest_nonzero_index,
            "in_G": self.in_G,
        }
        if self.cross_check is not None:
            d["arithmetic_degree"] = self.cross_check.to_dict()
            d["cross_check_ok"] = self.cross_check_ok
        return d


def classify_point(
    f: ModelSystem,
    H: Sequence[int],
    P: ProjPoint,
    tau: float = ZERO_THRESHOLD,
    n_max: int = 15,
    digit_budget: int = DEFAULT_DIGIT_BUDGET,
    prec: int = DEFAULT_PREC,
    cross_check: bool = True,
    orbit: Orbit | None = None,
    classes: list[Eigenclass] | None = None,
) -> ClassificationRecord:
    """alpha_f(P) from the first eigenclass (by decreasing |lambda|) with nonzero hat-h."""
    if classes is None:
        _, classes = vh_eigenclasses(f, H)
    if orbit is None:
        orbit = iterate(f, P, max(n_max, 30 if cross_check else 0), digit_budget)
    lam1 = max(abs(c.eigenvalue) for c in classes)
    blocks = []
    first = None
    ambiguous = []
    for idx, c in enumerate(classes):
        if abs(c.eigenvalue) <= 1:
            continue
        hv = canonical_height(f, c.divisor, P, n_max, prec, digit_budget, orbit=orbit)
        blocks.append((f"{c.eigenvalue}:{list(c.divisor)}", hv))
        mag = abs(float(hv.value))
        if tau / 10 < mag < 10 * tau:
            ambiguous.append(idx)
        if first is None and mag > tau:
            first = idx
    alpha = float(abs(classes[first].eigenvalue)) if first is not None else 1.0
    est = None
    ok = None
    if cross_check:
        est = arithmetic_degree(f, P, orbit=orbit, prec=prec)
        if est.converged:
            ok = abs(est.estimate - alpha) <= 0.05
    record = ClassificationRecord(
        P, tuple(blocks), alpha, "proven-structure", first, float(lam1), est, ok
    )
    if ambiguous:
        raise ThresholdAmbiguous(
            f"canonical heights of classes {ambiguous} fall in the ambiguity band ({tau / 10:g}, {10 * tau:g})",
            record=record,
        )
    return record


# ---------------------------------------------------------------------------
# surveys


@dataclass(frozen=True)
class SurveyReport:
    records: tuple[ClassificationRecord, ...]
    lambda1: float
    counts: dict
    density_ratio: float
    alpha_equals_lambda1: float
    invariance_violations: int
    ambiguous: tuple[ProjPoint, ...] = field(default=())

    def summary(self) -> dict:
        return {
            "lambda1": self.lambda1,
            "counts": dict(self.counts),
            "density_ratio": self.density_ratio,
            "alpha_equals_lambda1": self.alpha_equals_lambda1,
            "invariance_violations": self.invariance_violations,
            "ambiguous": [str(p) for p in self.ambiguous],
        }

    def csv_rows(self) -> list[list]:
        labels = [label for label, _ in self.records[0].block_heights] if self.records else []
        rows = [["point", "h", *[f"hhat[{l}]" for l in labels], "alpha", "in_G"]]
        for r in self.records:
            rows.append(
                [
                    str(r.point),
                    repr(float(weil_height(r.point).value)),
                    *[repr(float(hv.value)) for _, hv in r.block_heights],
                    repr(r.alpha),
                    int(r.in_G),
                ]
            )
        return rows


def _classify_job(args):
    f, H, P, tau, n_max, digit_budget, prec, classes = args
    try:
        return classify_point(f, H, P, tau, n_max, digit_budget, prec, cross_check=False, classes=classes)
    except ThresholdAmbiguous as exc:
        return exc


def survey_small_set(
    f: ModelSystem,
    H: Sequence[int],
    bound: int,
    tau: float = ZERO_THRESHOLD,
    n_max: int = 12,
    digit_budget: int = 20_000,
    prec: int = DEFAULT_PREC,
    workers: int = 1,
    cache: OrbitCache | None = None,
    norm: str = "sum",
) -> SurveyReport:
    """Classify every rational point with h_H <= log(bound); split into G and B.

    G collects the points whose top-block canonical heights all vanish.  The
    forward invariance of G is checked by classifying f(P) for each P in G.
    """
    _, classes = vh_eigenclasses(f, H)
    points = rational_points(f.k, bound, weights=H, norm=norm)
    jobs = [(f, tuple(H), P, tau, n_max, digit_budget, prec, classes) for P in points]
    if workers > 1:
        with ProcessPoolExecutor(workers) as ex:
            results = list(ex.map(_classify_job, jobs, chunksize=32))
    elif cache is not None:
        results = []
        for P in points:
            orb = cache.get(f, P, n_max, digit_budget)
            try:
                results.append(
                    classify_point(f, H, P, tau, n_max, digit_budget, prec, cross_check=False, orbit=orb, classes=classes)
                )
            except ThresholdAmbiguous as exc:
                results.append(exc)
    else:
        results = [_classify_job(j) for j in jobs]
    records, ambiguous = [], []
    for P, r in zip(points, results):
        if isinstance(r, ThresholdAmbiguous):
            ambiguous.append(P)
        else:
            records.append(r)
    lam1 = max(float(abs(c.eigenvalue)) for c in classes)
    G = [r for r in records if r.in_G]
    violations = 0
    for r in G:
        img = f.apply(r.point)
        try:
            rr = classify_point(f, H, img, tau, n_max, digit_budget, prec, cross_check=False, classes=classes)
        except ThresholdAmbiguous:
            violations += 1
            continue
        if not rr.in_G:
            violations += 1
    total = len(records)
    n_top = sum(1 for r in records if abs(r.alpha - lam1) < 1e-12)
    return SurveyReport(
        tuple(records),
        lam1,
        {"G": len(G), "B": total - len(G), "total": total},
        (total - len(G)) / total if total else 0.0,
        n_top / total if total else 0.0,
        violations,
        tuple(ambiguous),
    )
