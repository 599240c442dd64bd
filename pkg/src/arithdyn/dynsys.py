"""Polynomial self-maps of (P^1)^k over Q that may permute the factors.

A binary form of degree d is stored as its d+1 coefficients, the j-th one
multiplying x^(d-j) y^j.  Output factor i of a ``ModelSystem`` is
``[F_i(x, y) : G_i(x, y)]`` evaluated on input factor ``perm[i]`` (0-based).
"""
from __future__ import annotations

import enum
import hashlib
import json
import math
import threading
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property, lru_cache
from itertools import product
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .errors import DegreeZero, NotAMorphism, NotEquivariant
from .exactlin import IntMatrix, bareiss_det, rank, rational_spectrum

DEFAULT_DIGIT_BUDGET = 200_000


# ---------------------------------------------------------------------------
# binary forms


def form_degree(F: Sequence[int]) -> int:
    return len(F) - 1


def form_eval(F: Sequence[int], x: int, y: int) -> int:
    d = len(F) - 1
    xp = [1] * (d + 1)
    yp = [1] * (d + 1)
    for i in range(1, d + 1):
        xp[i] = xp[i - 1] * x
        yp[i] = yp[i - 1] * y
    return sum(c * xp[d - j] * yp[j] for j, c in enumerate(F) if c)


def form_mul(A: Sequence[int], B: Sequence[int]) -> tuple[int, ...]:
    out = [0] * (len(A) + len(B) - 1)
    for i, a in enumerate(A):
        if a:
            for j, b in enumerate(B):
                out[i + j] += a * b
    return tuple(out)


def form_pow(A: Sequence[int], e: int) -> tuple[int, ...]:
    out: tuple[int, ...] = (1,)
    for _ in range(e):
        out = form_mul(out, A)
    return out


def form_substitute(F: Sequence[int], A: Sequence[int], B: Sequence[int]) -> tuple[int, ...]:
    """F(A, B) for forms A, B of a common degree."""
    d = len(F) - 1
    e = len(A) - 1
    out = [0] * (d * e + 1)
    for j, c in enumerate(F):
        if c:
            term = form_mul(form_pow(A, d - j), form_pow(B, j))
            for t, v in enumerate(term):
                out[t] += c * v
    return tuple(out)


def resultant(F: Sequence[int], G: Sequence[int]) -> int:
    """Homogeneous resultant of two binary forms via the Sylvester matrix."""
    d, e = len(F) - 1, len(G) - 1
    n = d + e
    if n == 0:
        return 1
    rows = []
    for i in range(e):
        rows.append([0] * i + list(F) + [0] * (n - d - 1 - i))
    for i in range(d):
        rows.append([0] * i + list(G) + [0] * (n - e - 1 - i))
    return bareiss_det(rows)


# ---------------------------------------------------------------------------
# points


def _normalize_pair(x: int, y: int) -> tuple[int, int]:
    if x == 0 and y == 0:
        raise ValueError("[0:0] is not a point of P^1")
    g = math.gcd(x, y)
    x, y = x // g, y // g
    if y < 0 or (y == 0 and x < 0):
        x, y = -x, -y
    return x, y


@dataclass(frozen=True)
class ProjPoint:
    """Point of (P^1)^k with gcd-reduced, sign-normalized coordinates."""

    coords: tuple[tuple[int, int], ...]

    def __post_init__(self):
        object.__setattr__(self, "coords", tuple(_normalize_pair(int(x), int(y)) for x, y in self.coords))

    @classmethod
    def _coprime(cls, coords) -> "ProjPoint":
        # skips the gcd: callers guarantee each pair is already coprime
        P = object.__new__(cls)
        fixed = tuple((-x, -y) if y < 0 or (y == 0 and x < 0) else (x, y) for x, y in coords)
        object.__setattr__(P, "coords", fixed)
        return P

    @classmethod
    def affine(cls, *values) -> "ProjPoint":
        """From affine values; ``None`` or ``"inf"`` stands for the point at infinity."""
        coords = []
        for v in values:
            if v is None or v == "inf":
                coords.append((1, 0))
            else:
                q = Fraction(v)
                coords.append((q.numerator, q.denominator))
        return cls(tuple(coords))

    @classmethod
    def parse(cls, text: str) -> "ProjPoint":
        """Parse ``"2/3,inf,-1"``, ``"(2/3,inf)"`` or ``"[2:3],[1:0]"``."""
        coords = []
        text = text.replace(" ", "")
        if text.startswith("(") and text.endswith(")"):
            text = text[1:-1]
        for part in text.split(","):
            if part.startswith("["):
                x, y = part.strip("[]").split(":")
                coords.append((int(x), int(y)))
            elif part in ("inf", "oo", "∞"):
                coords.append((1, 0))
            else:
                q = Fraction(part)
                coords.append((q.numerator, q.denominator))
        return cls(tuple(coords))

    @property
    def k(self) -> int:
        return len(self.coords)

    def naive_heights(self) -> tuple[int, ...]:
        return tuple(max(abs(x), abs(y)) for x, y in self.coords)

    def __str__(self) -> str:
        parts = []
        for x, y in self.coords:
            if y == 0:
                parts.append("inf")
            elif y == 1:
                parts.append(str(x))
            else:
                parts.append(f"{x}/{y}")
        return "(" + ",".join(parts) + ")"


# ---------------------------------------------------------------------------
# systems


@dataclass(frozen=True)
class DivisorClass:
    """Multidegree (a_1..a_k) on (P^1)^k."""

    multidegree: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "multidegree", tuple(int(a) for a in self.multidegree))

    @property
    def k(self) -> int:
        return len(self.multidegree)

    @property
    def is_nef(self) -> bool:
        return all(a >= 0 for a in self.multidegree)

    @property
    def is_ample(self) -> bool:
        return all(a > 0 for a in self.multidegree)

    @property
    def is_principal(self) -> bool:
        return not any(self.multidegree)


@dataclass(frozen=True)
class ModelSystem:
    k: int
    perm: tuple[int, ...]
    components: tuple[tuple[tuple[int, ...], tuple[int, ...]], ...]

    @cached_property
    def degrees(self) -> tuple[int, ...]:
        return tuple(len(F) - 1 for F, _ in self.components)

    @cached_property
    def pullback(self) -> IntMatrix:
        """f^* on Pic = Z^k: the class H_i pulls back to d_i H_perm(i)."""
        rows = [[0] * self.k for _ in range(self.k)]
        for i, d in enumerate(self.degrees):
            rows[self.perm[i]][i] = d
        return IntMatrix(tuple(tuple(r) for r in rows))

    @cached_property
    def resultants(self) -> tuple[int, ...]:
        return tuple(abs(resultant(F, G)) for F, G in self.components)

    @cached_property
    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def apply(self, P: ProjPoint) -> ProjPoint:
        out = []
        for i, (F, G) in enumerate(self.components):
            x, y = P.coords[self.perm[i]]
            u, v = form_eval(F, x, y), form_eval(G, x, y)
            # for coprime (x, y) the common factor of u and v divides Res(F, G)
            g = math.gcd(u % self.resultants[i], self.resultants[i]) if self.resultants[i] > 1 else 1
            g = math.gcd(g, v)
            out.append((u // g, v // g) if g > 1 else (u, v))
        return ProjPoint._coprime(out)

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "perm": list(self.perm),
            "components": [
                {"degree": len(F) - 1, "F_coeffs": list(F), "G_coeffs": list(G)} for F, G in self.components
            ],
        }


def build_system(spec: Mapping | None = None, *, k=None, perm=None, components=None) -> ModelSystem:
    """Validate a system description and return the model.

    ``spec`` follows the config schema ``{k, perm, components: [{degree,
    F_coeffs, G_coeffs}]}``; keyword arguments are an alternative with
    ``components`` given as (F, G) coefficient pairs.
    """
    if spec is not None:
        k = spec["k"]
        perm = spec.get("perm", list(range(k)))
        components = []
        for c in spec["components"]:
            F, G = tuple(c["F_coeffs"]), tuple(c["G_coeffs"])
            if "degree" in c and not (len(F) - 1 == len(G) - 1 == c["degree"]):
                raise ValueError(f"declared degree {c['degree']} does not match coefficient lengths")
            components.append((F, G))
    if perm is None:
        perm = list(range(k))
    perm = tuple(int(p) for p in perm)
    if len(perm) != k or sorted(perm) != list(range(k)):
        raise ValueError(f"perm {list(perm)} is not a permutation of 0..{k - 1}")
    if len(components) != k:
        raise ValueError(f"expected {k} components, got {len(components)}")
    comps = []
    for i, (F, G) in enumerate(components):
        F, G = tuple(int(c) for c in F), tuple(int(c) for c in G)
        if len(F) != len(G):
            raise ValueError(f"component {i}: F and G must have the same degree")
        if len(F) - 1 < 1:
            raise DegreeZero(i)
        if resultant(F, G) == 0:
            raise NotAMorphism(i)
        comps.append((F, G))
    return ModelSystem(k, perm, tuple(comps))


def power_map(*degrees: int) -> ModelSystem:
    """(x_1^d_1, ..., x_k^d_k)."""
    comps = []
    for d in degrees:
        comps.append((tuple([1] + [0] * d), tuple([0] * d + [1])))
    return build_system(k=len(degrees), perm=range(len(degrees)), components=comps)


def compose(f: ModelSystem, g: ModelSystem) -> ModelSystem:
    """f o g (apply g first)."""
    if f.k != g.k:
        raise ValueError("systems on different products")
    perm = []
    comps = []
    for i, (F, G) in enumerate(f.components):
        p = f.perm[i]
        A, B = g.components[p]
        perm.append(g.perm[p])
        comps.append((form_substitute(F, A, B), form_substitute(G, A, B)))
    return build_system(k=f.k, perm=perm, components=comps)


# ---------------------------------------------------------------------------
# orbits


@lru_cache(maxsize=8)
def _digit_limit(budget: int) -> int:
    return 10**budget


@dataclass(frozen=True)
class Orbit:
    points: tuple[ProjPoint, ...]
    truncated: bool

    def __len__(self):
        return len(self.points)

    def __getitem__(self, n):
        return self.points[n]


def iterate(f: ModelSystem, P: ProjPoint, n: int, digit_budget: int = DEFAULT_DIGIT_BUDGET) -> Orbit:
    """Orbit prefix P, f(P), ..., f^n(P).

    Stops early, with ``truncated`` set, once a coordinate would need more
    than ``digit_budget`` decimal digits; the offending point is dropped.
    """
    if P.k != f.k:
        raise ValueError("point and system have different numbers of factors")
    limit = _digit_limit(digit_budget)
    pts = [P]
    for _ in range(n):
        Q = f.apply(pts[-1])
        if any(abs(x) >= limit or abs(y) >= limit for x, y in Q.coords):
            return Orbit(tuple(pts), True)
        pts.append(Q)
    return Orbit(tuple(pts), False)


class OrbitCache:
    """Append-only orbit store keyed by (system digest, starting point).

    Reads need no lock: entries are replaced only by strictly longer
    prefixes, and a dict assignment is atomic.  Writers serialize on a lock.
    With ``path`` set, new entries are appended to a JSON-lines file.
    """

    def __init__(self, path: str | Path | None = None):
        self._store: dict[tuple[str, ProjPoint], Orbit] = {}
        self._lock = threading.Lock()
        self.path = Path(path) if path is not None else None
        if self.path is not None and self.path.exists():
            with self.path.open() as fh:
                for line in fh:
                    rec = json.loads(line)
                    pts = tuple(ProjPoint(tuple(tuple(map(int, c)) for c in p)) for p in rec["points"])
                    self._put((rec["system"], pts[0]), Orbit(pts, rec["truncated"]))

    def _put(self, key, orbit: Orbit) -> bool:
        old = self._store.get(key)
        if old is None or len(orbit) > len(old):
            self._store[key] = orbit
            return True
        return False

    def get(self, f: ModelSystem, P: ProjPoint, n: int, digit_budget: int = DEFAULT_DIGIT_BUDGET) -> Orbit:
        key = (f.digest, P)
        orb = self._store.get(key)
        if orb is not None and (len(orb) > n or orb.truncated):
            if len(orb) > n + 1:
                return Orbit(orb.points[: n + 1], False)
            return orb
        orb = iterate(f, P, n, digit_budget)
        with self._lock:
            if self._put(key, orb) and self.path is not None:
                rec = {
                    "system": f.digest,
                    "points": [[list(c) for c in p.coords] for p in orb.points],
                    "truncated": orb.truncated,
                }
                with self.path.open("a") as fh:
                    fh.write(json.dumps(rec) + "\n")
        return orb

    def __len__(self):
        return len(self._store)


# ---------------------------------------------------------------------------
# rational points


def farey(N: int) -> list[tuple[int, int]]:
    """Reduced fractions p/q in [0, 1] with q <= N, increasing."""
    a, b, c, d = 0, 1, 1, N
    out = [(a, b)]
    while c <= N:
        k = (N + b) // d
        a, b, c, d = c, d, k * c - a, k * d - b
        out.append((a, b))
    return out


def p1_points(N: int) -> list[tuple[int, int]]:
    """All points [x:y] of P^1(Q) with max(|x|, |y|) <= N."""
    pts = set()
    for p, q in farey(N):
        for x, y in ((p, q), (-p, q), (q, p), (-q, p)):
            if (x, y) != (0, 0):
                pts.add(_normalize_pair(x, y))
    return sorted(pts, key=lambda t: (max(abs(t[0]), abs(t[1])), t))


def rational_points(
    k: int, bound: int, weights: Sequence[int] | None = None, norm: str = "sum"
) -> list[ProjPoint]:
    """Rational points of (P^1)^k of bounded height.

    ``norm="sum"`` keeps prod_i H(x_i)^w_i <= bound, i.e. the weil height of
    sum w_i H_i is at most log(bound).  ``norm="max"`` keeps the box
    max_i H(x_i) <= bound instead (weights ignored).
    """
    if weights is None:
        weights = [1] * k
    if any(w <= 0 for w in weights):
        raise ValueError("weights must be positive")
    if norm not in ("sum", "max"):
        raise ValueError(f"unknown norm {norm!r}")
    base = p1_points(bound)
    if norm == "max":
        return [ProjPoint(c) for c in product(base, repeat=k)]
    out = []

    def rec(i, acc, prefix):
        if i == k:
            out.append(ProjPoint(tuple(prefix)))
            return
        for pt in base:
            h = max(abs(pt[0]), abs(pt[1])) ** weights[i]
            if acc * h > bound:
                break
            rec(i + 1, acc * h, prefix + [pt])

    rec(0, 1, [])
    return out


# ---------------------------------------------------------------------------
# sections and base loci


@dataclass(frozen=True)
class SectionSpace:
    """Multihomogeneous monomial basis of H^0((P^1)^k, O(a_1..a_k)).

    A monomial is recorded by its y-exponents (j_1..j_k): it is
    prod_i x_i^(a_i - j_i) y_i^j_i.
    """

    multidegree: tuple[int, ...]
    monomials: tuple[tuple[int, ...], ...]

    @property
    def dim(self) -> int:
        return len(self.monomials)

    def index(self, mono: tuple[int, ...]) -> int:
        return self.monomials.index(mono)


def section_space(D: DivisorClass | Sequence[int]) -> SectionSpace:
    a = D.multidegree if isinstance(D, DivisorClass) else tuple(D)
    if any(x < 0 for x in a):
        return SectionSpace(tuple(a), ())
    monos = tuple(product(*[range(x + 1) for x in a]))
    return SectionSpace(tuple(a), monos)


class BaseLocus(enum.Enum):
    EMPTY = "Empty"
    EVERYTHING = "Everything"


def base_locus(D: DivisorClass | Sequence[int]) -> BaseLocus:
    """Bs(D) on (P^1)^k; equal to the stable base locus on this family."""
    a = D.multidegree if isinstance(D, DivisorClass) else tuple(D)
    return BaseLocus.EMPTY if all(x >= 0 for x in a) else BaseLocus.EVERYTHING


def pullback_class(f: ModelSystem, D: DivisorClass | Sequence[int]) -> DivisorClass:
    a = D.multidegree if isinstance(D, DivisorClass) else tuple(D)
    return DivisorClass(f.pullback @ a)


def _monomial_pullback(f: ModelSystem, a: Sequence[int], mono: Sequence[int]) -> dict[tuple[int, ...], int]:
    # factor perm(i) receives F_i^(a_i - j_i) G_i^j_i
    per_factor: list[tuple[int, ...]] = [(1,)] * f.k
    for i, (F, G) in enumerate(f.components):
        part = form_mul(form_pow(F, a[i] - mono[i]), form_pow(G, mono[i]))
        per_factor[f.perm[i]] = part
    out: dict[tuple[int, ...], int] = {}
    for combo in product(*[list(enumerate(p)) for p in per_factor]):
        c = 1
        key = []
        for j, coef in combo:
            c *= coef
            key.append(j)
        if c:
            out[tuple(key)] = out.get(tuple(key), 0) + c
    return out


def section_pullback_matrix(f: ModelSystem, D: DivisorClass | Sequence[int]) -> list[list[int]]:
    """Matrix of s -> f^*s from H^0(D) to H^0(f^*D); columns index the source basis."""
    a = D.multidegree if isinstance(D, DivisorClass) else tuple(D)
    src = section_space(a)
    tgt = section_space(pullback_class(f, a))
    cols = []
    for mono in src.monomials:
        img = _monomial_pullback(f, a, mono)
        cols.append([img.get(m, 0) for m in tgt.monomials])
    return [list(r) for r in zip(*cols)] if cols else []


@dataclass(frozen=True)
class PulledSection:
    multidegree: tuple[int, ...]
    coefficients: tuple[int, ...]
    injective: bool


def pullback_section(f: ModelSystem, D: DivisorClass | Sequence[int], s: Sequence[int]) -> PulledSection:
    """Pull back the section with coefficient vector ``s`` (basis of section_space(D))."""
    a = D.multidegree if isinstance(D, DivisorClass) else tuple(D)
    src = section_space(a)
    if len(s) != src.dim:
        raise ValueError(f"section vector of length {len(s)} for a {src.dim}-dim space")
    tgt = pullback_class(f, a)
    A = section_pullback_matrix(f, a)
    coeffs = tuple(sum(r[j] * s[j] for j in range(len(s))) for r in A) if A else ()
    injective = src.dim == 0 or rank(A) == src.dim
    return PulledSection(tgt.multidegree, coeffs, injective)


# ---------------------------------------------------------------------------
# relative dynamical degree


@dataclass(frozen=True)
class RelativeDegreeReport:
    radius: tuple[Fraction, Fraction]
    block_radius: tuple[Fraction, Fraction]
    complement_radius: tuple[Fraction, Fraction]
    max_radius: tuple[Fraction, Fraction]
    agrees: bool

    def to_dict(self) -> dict:
        return {
            k: [str(v[0]), str(v[1])] if isinstance(v, tuple) else v
            for k, v in self.__dict__.items()
        }


def relative_degree_check(f: ModelSystem, S: Iterable[int], width: Fraction = Fraction(1, 2**30)) -> RelativeDegreeReport:
    """Check lambda_1(f) = max(lambda_1 on the S-factors, lambda_1 on the rest)."""
    S = sorted(set(S))
    T = [i for i in range(f.k) if i not in S]
    if any(f.perm[i] not in S for i in S):
        raise NotEquivariant(f"perm {list(f.perm)} does not preserve {S}")
    M = f.pullback
    full = rational_spectrum(M, width).spectral_radius
    one = (Fraction(0), Fraction(0))
    rs = rational_spectrum(M.submatrix(S), width).spectral_radius if S else one
    rt = rational_spectrum(M.submatrix(T), width).spectral_radius if T else one
    mx = (max(rs[0], rt[0]), max(rs[1], rt[1]))
    agrees = full[0] <= mx[1] and mx[0] <= full[1] and full[1] - full[0] <= width and mx[1] - mx[0] <= width
    return RelativeDegreeReport(full, rs, rt, mx, agrees)
