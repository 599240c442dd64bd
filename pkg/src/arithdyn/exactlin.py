"""Exact linear algebra over Q for pullback matrices.

Everything here is exact: integer and ``Fraction`` arithmetic only.  The one
place real numbers enter is the enclosure of irrational eigenvalues, and there
the enclosures are intervals with rational endpoints that are certified to
contain the roots (Sturm sequences for real roots, Weierstrass inclusion discs
for non-real ones).
"""
from __future__ import annotations

import enum
import math
import operator
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import mpmath

from .errors import IntervalSeparationFailure, NotDiagonalizable, NotEigenpair

DEFAULT_WIDTH = Fraction(1, 2**40)

_MAX_DPS = 4000


def _as_int(x) -> int:
    if isinstance(x, Fraction):
        if x.denominator != 1:
            raise ValueError(f"non-integral entry {x}")
        return x.numerator
    try:
        return operator.index(x)
    except TypeError:
        if isinstance(x, float) and x.is_integer():
            return int(x)
        raise ValueError(f"non-integral entry {x!r}") from None


def _frac_str(q: Fraction) -> str:
    return str(q.numerator) if q.denominator == 1 else f"{q.numerator}/{q.denominator}"


# ---------------------------------------------------------------------------
# matrices


@dataclass(frozen=True)
class IntMatrix:
    """Square matrix with arbitrary-precision integer entries."""

    rows: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        rows = tuple(tuple(_as_int(x) for x in r) for r in self.rows)
        n = len(rows)
        if n == 0 or any(len(r) != n for r in rows):
            raise ValueError("IntMatrix must be square and nonempty")
        object.__setattr__(self, "rows", rows)

    @classmethod
    def identity(cls, n: int) -> "IntMatrix":
        return cls.scalar(n, 1)

    @classmethod
    def scalar(cls, n: int, c: int) -> "IntMatrix":
        return cls(tuple(tuple(c if i == j else 0 for j in range(n)) for i in range(n)))

    @classmethod
    def diag(cls, *entries: int) -> "IntMatrix":
        n = len(entries)
        return cls(tuple(tuple(entries[i] if i == j else 0 for j in range(n)) for i in range(n)))

    @property
    def n(self) -> int:
        return len(self.rows)

    def __getitem__(self, ij):
        i, j = ij
        return self.rows[i][j]

    def column(self, j: int) -> tuple[int, ...]:
        return tuple(r[j] for r in self.rows)

    def transpose(self) -> "IntMatrix":
        return IntMatrix(tuple(zip(*self.rows)))

    def to_list(self) -> list[list[int]]:
        return [list(r) for r in self.rows]

    def trace(self) -> int:
        return sum(self.rows[i][i] for i in range(self.n))

    def is_zero(self) -> bool:
        return all(x == 0 for r in self.rows for x in r)

    def is_scalar(self) -> bool:
        c = self.rows[0][0]
        return self == IntMatrix.scalar(self.n, c)

    def __add__(self, other: "IntMatrix") -> "IntMatrix":
        return IntMatrix(tuple(tuple(a + b for a, b in zip(r, s)) for r, s in zip(self.rows, other.rows)))

    def __sub__(self, other: "IntMatrix") -> "IntMatrix":
        return IntMatrix(tuple(tuple(a - b for a, b in zip(r, s)) for r, s in zip(self.rows, other.rows)))

    def __neg__(self) -> "IntMatrix":
        return IntMatrix(tuple(tuple(-a for a in r) for r in self.rows))

    def __mul__(self, c: int) -> "IntMatrix":
        return IntMatrix(tuple(tuple(c * a for a in r) for r in self.rows))

    __rmul__ = __mul__

    def __matmul__(self, other):
        if isinstance(other, IntMatrix):
            cols = list(zip(*other.rows))
            return IntMatrix(tuple(tuple(sum(a * b for a, b in zip(r, c)) for c in cols) for r in self.rows))
        return tuple(sum(a * b for a, b in zip(r, other)) for r in self.rows)

    def __pow__(self, e: int) -> "IntMatrix":
        if e < 0:
            raise ValueError("negative matrix power")
        result = IntMatrix.identity(self.n)
        base = self
        while e:
            if e & 1:
                result = result @ base
            base = base @ base
            e >>= 1
        return result

    def submatrix(self, indices: Sequence[int]) -> "IntMatrix":
        return IntMatrix(tuple(tuple(self.rows[i][j] for j in indices) for i in indices))

    def det(self) -> int:
        return bareiss_det([list(r) for r in self.rows])


def bareiss_det(a: list[list[int]]) -> int:
    """Fraction-free determinant (Bareiss); mutates ``a``."""
    n = len(a)
    if n == 0:
        return 1
    sign = 1
    prev = 1
    for k in range(n - 1):
        if a[k][k] == 0:
            for i in range(k + 1, n):
                if a[i][k] != 0:
                    a[k], a[i] = a[i], a[k]
                    sign = -sign
                    break
            else:
                return 0
        akk = a[k][k]
        for i in range(k + 1, n):
            aik = a[i][k]
            row_i, row_k = a[i], a[k]
            for j in range(k + 1, n):
                row_i[j] = (row_i[j] * akk - aik * row_k[j]) // prev
        prev = akk
    return sign * a[n - 1][n - 1]


# rational row operations -----------------------------------------------------

def rref(rows: Iterable[Sequence]) -> tuple[list[list[Fraction]], list[int]]:
    """Reduced row echelon form over Q; returns (matrix, pivot columns)."""
    m = [[Fraction(x) for x in r] for r in rows]
    if not m:
        return m, []
    ncols = len(m[0])
    pivots = []
    r = 0
    for c in range(ncols):
        piv = next((i for i in range(r, len(m)) if m[i][c] != 0), None)
        if piv is None:
            continue
        m[r], m[piv] = m[piv], m[r]
        inv = 1 / m[r][c]
        m[r] = [x * inv for x in m[r]]
        for i in range(len(m)):
            if i != r and m[i][c] != 0:
                f = m[i][c]
                m[i] = [a - f * b for a, b in zip(m[i], m[r])]
        pivots.append(c)
        r += 1
        if r == len(m):
            break
    return m, pivots


def rank(rows: Iterable[Sequence]) -> int:
    return len(rref(rows)[1])


def primitive(v: Sequence) -> tuple[int, ...]:
    """Scale a rational vector to a primitive integer vector, keeping direction."""
    v = [Fraction(x) for x in v]
    den = 1
    for x in v:
        den = den * x.denominator // math.gcd(den, x.denominator)
    ints = [int(x * den) for x in v]
    g = 0
    for x in ints:
        g = math.gcd(g, x)
    if g == 0:
        return tuple(ints)
    return tuple(x // g for x in ints)


def nullspace(rows: Sequence[Sequence], ncols: int | None = None) -> list[tuple[int, ...]]:
    """Basis of the right kernel as primitive integer vectors."""
    if ncols is None:
        ncols = len(rows[0])
    if not rows:
        return [tuple(1 if i == j else 0 for i in range(ncols)) for j in range(ncols)]
    m, pivots = rref(rows)
    free = [c for c in range(ncols) if c not in pivots]
    basis = []
    for f in free:
        v = [Fraction(0)] * ncols
        v[f] = Fraction(1)
        for r, p in enumerate(pivots):
            v[p] = -m[r][f]
        basis.append(primitive(v))
    return basis


def solve(rows: Sequence[Sequence], rhs: Sequence) -> list[Fraction] | None:
    """One rational solution of ``rows @ x = rhs`` or None."""
    ncols = len(rows[0])
    aug = [list(r) + [b] for r, b in zip(rows, rhs)]
    m, pivots = rref(aug)
    if ncols in pivots:
        return None
    x = [Fraction(0)] * ncols
    for r, p in enumerate(pivots):
        x[p] = m[r][ncols]
    return x


def mat_vec(rows, v):
    return tuple(sum(a * b for a, b in zip(r, v)) for r in rows)


def krylov_basis(M: IntMatrix, v: Sequence[int]) -> list[tuple[int, ...]]:
    """Basis v, Mv, M^2 v, ... of the cyclic subspace generated by ``v``."""
    basis: list[tuple[int, ...]] = []
    w = tuple(_as_int(x) for x in v)
    while any(w) and rank(basis + [w]) > len(basis):
        basis.append(w)
        w = M @ w
    return basis


def restrict(M: IntMatrix, basis: Sequence[Sequence[int]]) -> list[list[Fraction]]:
    """Matrix of M on the invariant subspace spanned by ``basis`` (columns)."""
    cols = []
    bt = [list(col) for col in zip(*basis)]
    for b in basis:
        x = solve(bt, M @ b)
        if x is None:
            raise ValueError("subspace is not M-invariant")
        cols.append(x)
    return [list(r) for r in zip(*cols)]


# ---------------------------------------------------------------------------
# polynomials


def _trim(c: list) -> list:
    while c and c[-1] == 0:
        c.pop()
    return c


@dataclass(frozen=True)
class Poly:
    """Integer polynomial, coefficients in ascending degree."""

    coeffs: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "coeffs", tuple(_trim([_as_int(c) for c in self.coeffs])))

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    @property
    def leading(self) -> int:
        return self.coeffs[-1] if self.coeffs else 0

    def is_zero(self) -> bool:
        return not self.coeffs

    def __call__(self, x):
        acc = 0
        for c in reversed(self.coeffs):
            acc = acc * x + c
        return acc

    def derivative(self) -> "Poly":
        return Poly(tuple(i * c for i, c in enumerate(self.coeffs))[1:])

    def __str__(self) -> str:
        if not self.coeffs:
            return "0"
        parts = []
        for i in range(self.degree, -1, -1):
            c = self.coeffs[i]
            if c == 0:
                continue
            mono = "" if i == 0 else ("x" if i == 1 else f"x^{i}")
            mag = abs(c)
            body = str(mag) if (mag != 1 or i == 0) else ""
            body += mono
            if not parts:
                parts.append(("-" if c < 0 else "") + body)
            else:
                parts.append(("- " if c < 0 else "+ ") + body)
        return " ".join(parts)


def _qpoly(p) -> list[Fraction]:
    return [Fraction(c) for c in (p.coeffs if isinstance(p, Poly) else p)]


def _qdivmod(a: list[Fraction], b: list[Fraction]):
    a = list(a)
    b = _trim(list(b))
    if not b:
        raise ZeroDivisionError("polynomial division by zero")
    q = [Fraction(0)] * max(len(a) - len(b) + 1, 1)
    lb = b[-1]
    while len(_trim(a)) >= len(b):
        shift = len(a) - len(b)
        f = a[-1] / lb
        q[shift] = f
        for i, c in enumerate(b):
            a[shift + i] -= f * c
        a.pop()
    return _trim(q), _trim(a)


def _to_primitive(c: list[Fraction]) -> Poly:
    """Scale a rational polynomial to a primitive integer one, positive leading."""
    c = _trim(list(c))
    if not c:
        return Poly(())
    v = primitive(c)
    if v[-1] < 0:
        v = tuple(-x for x in v)
    return Poly(v)


def poly_gcd(a: Poly, b: Poly) -> Poly:
    x, y = _qpoly(a), _qpoly(b)
    while _trim(y):
        _, r = _qdivmod(x, y)
        x, y = y, r
    return _to_primitive(x)


def poly_quo(a: Poly, b: Poly) -> Poly:
    """Exact quotient a / b over Q, returned as a primitive integer polynomial."""
    q, r = _qdivmod(_qpoly(a), _qpoly(b))
    if r:
        raise ValueError("inexact polynomial division")
    return _to_primitive(q)


def poly_mul(a: Poly, b: Poly) -> Poly:
    if a.is_zero() or b.is_zero():
        return Poly(())
    out = [0] * (len(a.coeffs) + len(b.coeffs) - 1)
    for i, x in enumerate(a.coeffs):
        for j, y in enumerate(b.coeffs):
            out[i + j] += x * y
    return Poly(tuple(out))


def _qgcd_monic(a: list[Fraction], b: list[Fraction]) -> list[Fraction]:
    x, y = _trim(list(a)), _trim(list(b))
    while y:
        _, r = _qdivmod(x, y)
        x, y = y, r
    lead = x[-1]
    return [c / lead for c in x]


def _qderiv(a: list[Fraction]) -> list[Fraction]:
    return [i * c for i, c in enumerate(a)][1:]


def _qsub(a, b):
    n = max(len(a), len(b))
    a = list(a) + [Fraction(0)] * (n - len(a))
    b = list(b) + [Fraction(0)] * (n - len(b))
    return _trim([x - y for x, y in zip(a, b)])


def _qquo(a, b):
    q, r = _qdivmod(a, b)
    assert not r, "inexact division in squarefree decomposition"
    return q


def squarefree_decomposition(p: Poly) -> list[tuple[Poly, int]]:
    """Yun's algorithm: p = c * prod S_i^i with S_i squarefree, pairwise coprime."""
    if p.degree <= 0:
        return []
    f = _qpoly(p)
    df = _qderiv(f)
    a = _qgcd_monic(f, df)
    b = _qquo(f, a)
    c = _qquo(df, a)
    d = _qsub(c, _qderiv(b))
    out = []
    i = 1
    while len(b) > 1:
        g = _qgcd_monic(b, d) if d else b
        if len(g) > 1:
            out.append((_to_primitive(g), i))
        b = _qquo(b, g)
        c = _qquo(d, g) if d else []
        d = _qsub(c, _qderiv(b))
        i += 1
    return out


def char_poly(M: IntMatrix) -> Poly:
    """det(xI - M) via Faddeev-LeVerrier with exact integer division."""
    n = M.n
    coeffs = [0] * (n + 1)
    coeffs[n] = 1
    Mk = IntMatrix.scalar(n, 0)
    for k in range(1, n + 1):
        Mk = M @ Mk + IntMatrix.scalar(n, coeffs[n - k + 1])
        t = (M @ Mk).trace()
        q, r = divmod(-t, k)
        assert r == 0, "Faddeev-LeVerrier division must be exact over Z"
        coeffs[n - k] = q
    return Poly(tuple(coeffs))


# ---------------------------------------------------------------------------
# roots


def _divisors(n: int) -> list[int]:
    n = abs(n)
    small, large = [], []
    d = 1
    while d * d <= n:
        if n % d == 0:
            small.append(d)
            if d * d != n:
                large.append(n // d)
        d += 1
    return small + large[::-1]


def rational_roots(p: Poly) -> list[tuple[Fraction, int]]:
    """Rational roots of an integer polynomial with multiplicities."""
    roots = []
    c = list(p.coeffs)
    k = 0
    while c and c[0] == 0:
        c.pop(0)
        k += 1
    if k:
        roots.append((Fraction(0), k))
    rest = Poly(tuple(c))
    if rest.degree <= 0:
        return roots
    # candidates from the squarefree part, whose constant term is smaller
    sf = poly_quo(rest, poly_gcd(rest, rest.derivative()))
    for q in _divisors(sf.leading):
        for pnum in _divisors(sf.coeffs[0]):
            for s in (pnum, -pnum):
                if math.gcd(s, q) != 1:
                    continue
                x = Fraction(s, q)
                if sf(x) == 0:
                    mult = 0
                    lin = Poly((-x.numerator, x.denominator))
                    while True:
                        qq, rr = _qdivmod(_qpoly(rest), _qpoly(lin))
                        if rr:
                            break
                        rest = _to_primitive(qq)
                        mult += 1
                    roots.append((x, mult))
    return roots


def _sturm_chain(p: Poly) -> list[list[Fraction]]:
    chain = [_qpoly(p), _qpoly(p.derivative())]
    while _trim(list(chain[-1])) and len(chain[-1]) > 1:
        _, r = _qdivmod(chain[-2], chain[-1])
        if not r:
            break
        chain.append([-x for x in r])
    return chain


def _qeval(c: list[Fraction], x: Fraction) -> Fraction:
    acc = Fraction(0)
    for a in reversed(c):
        acc = acc * x + a
    return acc


def _variations(chain, x) -> int:
    signs = []
    for c in chain:
        v = _qeval(c, x)
        if v != 0:
            signs.append(v > 0)
    return sum(1 for a, b in zip(signs, signs[1:]) if a != b)


def _cauchy_bound(p: Poly) -> Fraction:
    lead = abs(p.leading)
    return 1 + max(Fraction(abs(c), lead) for c in p.coeffs[:-1])


def real_root_intervals(p: Poly, width: Fraction) -> list[tuple[Fraction, Fraction]]:
    """Disjoint isolating intervals of width <= ``width`` for the real roots.

    ``p`` must be squarefree with no rational roots, so interval endpoints
    (always rational) are never roots and sign tests are exact.
    """
    if p.degree <= 0:
        return []
    chain = _sturm_chain(p)
    B = _cauchy_bound(p)
    stack = [(-B, B)]
    isolated = []
    while stack:
        a, b = stack.pop()
        cnt = _variations(chain, a) - _variations(chain, b)
        if cnt == 0:
            continue
        if cnt == 1:
            isolated.append((a, b))
            continue
        m = (a + b) / 2
        stack.append((a, m))
        stack.append((m, b))
    qp = _qpoly(p)
    out = []
    for a, b in sorted(isolated):
        sa = _qeval(qp, a) > 0
        while b - a > width:
            m = (a + b) / 2
            sm = _qeval(qp, m)
            if sm == 0:
                a = b = m
                break
            if (sm > 0) == sa:
                a = m
            else:
                b = m
        out.append((a, b))
    return out


def _sqrt_bounds(x: Fraction, bits: int) -> tuple[Fraction, Fraction]:
    """Rational lo <= sqrt(x) <= hi with hi - lo <= 2^-bits / den."""
    if x <= 0:
        return Fraction(0), Fraction(0)
    p, q = x.numerator, x.denominator
    scale = 1 << bits
    s = math.isqrt(p * q * scale * scale)
    lo = Fraction(s, q * scale)
    hi = lo if s * s == p * q * scale * scale else Fraction(s + 1, q * scale)
    return lo, hi


def _to_fraction(x) -> Fraction:
    sign, man, exp, _ = mpmath.mpf(x)._mpf_
    man = -int(man) if sign else int(man)
    return Fraction(man * 2**exp) if exp >= 0 else Fraction(man, 2 ** (-exp))


def _cmul(a, b):
    return (a[0] * b[0] - a[1] * b[1], a[0] * b[1] + a[1] * b[0])


def _cabs2(a) -> Fraction:
    return a[0] * a[0] + a[1] * a[1]


def _ceval(c: list[Fraction], z):
    acc = (Fraction(0), Fraction(0))
    for a in reversed(c):
        acc = _cmul(acc, z)
        acc = (acc[0] + a, acc[1])
    return acc


def _discs_disjoint(z1, r1sq, z2, r2sq) -> bool:
    d2 = _cabs2((z1[0] - z2[0], z1[1] - z2[1]))
    s = d2 - r1sq - r2sq
    return s > 0 and s * s > 4 * r1sq * r2sq


def complex_root_discs(p: Poly, n_real: int, width: Fraction):
    """Certified inclusion discs for the non-real roots of squarefree ``p``.

    Returns a list of (center, radius_squared) with Gaussian-rational centers.
    Discs D(z_i, n|W_i|) around Weierstrass corrections W_i; pairwise disjoint
    discs each hold exactly one root.
    """
    n = p.degree
    if n - n_real == 0:
        return []
    qp = _qpoly(p)
    lead = Fraction(p.leading)
    target = width / 4
    dps = 30 + int(-math.log10(float(width)) if width < 1 else 0)
    while dps <= _MAX_DPS:
        with mpmath.workdps(dps):
            try:
                approx = mpmath.polyroots(list(reversed(p.coeffs)), maxsteps=50 + 4 * dps, extraprec=2 * dps)
            except mpmath.libmp.NoConvergence:
                dps *= 2
                continue
            zs = [(_to_fraction(mpmath.re(z)), _to_fraction(mpmath.im(z))) for z in approx]
        rsq = []
        for i, z in enumerate(zs):
            den = lead * lead
            for j, w in enumerate(zs):
                if j != i:
                    den *= _cabs2((z[0] - w[0], z[1] - w[1]))
            if den == 0:
                rsq = None
                break
            rsq.append(n * n * _cabs2(_ceval(qp, z)) / den)
        if rsq is not None:
            ok = all(
                _discs_disjoint(zs[i], rsq[i], zs[j], rsq[j])
                for i in range(n)
                for j in range(i + 1, n)
            )
            nonreal = [i for i in range(n) if zs[i][1] != 0 and zs[i][1] ** 2 > rsq[i]]
            small = all(rsq[i] <= target * target for i in nonreal)
            if ok and small and len(nonreal) == n - n_real:
                return [(zs[i], rsq[i]) for i in nonreal]
        dps *= 2
    raise IntervalSeparationFailure(
        f"could not separate the complex roots of {p} within {_MAX_DPS} digits"
    )


# ---------------------------------------------------------------------------
# spectra


@dataclass(frozen=True)
class RootBox:
    """Certified enclosure of an irrational eigenvalue.

    For a real root, [lo, hi] encloses the root itself.  For a non-real root
    it encloses the modulus; ``imag_sign`` tells conjugates apart.
    """

    lo: Fraction
    hi: Fraction
    real: bool = True
    imag_sign: int = 0
    approx: complex | None = None

    def modulus(self) -> tuple[Fraction, Fraction]:
        if not self.real:
            return self.lo, self.hi
        if self.lo >= 0:
            return self.lo, self.hi
        if self.hi <= 0:
            return -self.hi, -self.lo
        return Fraction(0), max(-self.lo, self.hi)

    @property
    def width(self) -> Fraction:
        return self.hi - self.lo

    def to_dict(self) -> dict:
        d = {"interval": [_frac_str(self.lo), _frac_str(self.hi)], "real": self.real}
        if not self.real:
            d["imag_sign"] = self.imag_sign
            d["kind"] = "modulus"
        return d


@dataclass(frozen=True)
class SpectrumEntry:
    value: Fraction | RootBox
    algebraic_multiplicity: int
    geometric_multiplicity: int | None
    jordan_block_sizes: tuple[int, ...] | None

    @property
    def is_rational(self) -> bool:
        return isinstance(self.value, Fraction)

    def modulus(self) -> tuple[Fraction, Fraction]:
        if self.is_rational:
            a = abs(self.value)
            return a, a
        return self.value.modulus()

    def to_dict(self) -> dict:
        d = {
            "value": _frac_str(self.value) if self.is_rational else self.value.to_dict(),
            "algebraic_multiplicity": self.algebraic_multiplicity,
            "geometric_multiplicity": self.geometric_multiplicity,
            "jordan_block_sizes": list(self.jordan_block_sizes) if self.jordan_block_sizes is not None else None,
        }
        return d


@dataclass(frozen=True)
class Spectrum:
    entries: tuple[SpectrumEntry, ...]
    spectral_radius: tuple[Fraction, Fraction]
    char_poly: Poly

    def rational_eigenvalues(self) -> list[Fraction]:
        return [e.value for e in self.entries if e.is_rational]

    def entry(self, value: Fraction) -> SpectrumEntry:
        for e in self.entries:
            if e.is_rational and e.value == value:
                return e
        raise KeyError(value)

    @property
    def all_rational(self) -> bool:
        return all(e.is_rational for e in self.entries)

    def to_dict(self) -> dict:
        return {
            "char_poly": str(self.char_poly),
            "entries": [e.to_dict() for e in self.entries],
            "spectral_radius": [_frac_str(x) for x in self.spectral_radius],
        }


def _scaled_shift(M: IntMatrix, lam: Fraction) -> IntMatrix:
    """q*M - p*I for lam = p/q: same kernel structure as M - lam*I, integral."""
    return M * lam.denominator - IntMatrix.scalar(M.n, lam.numerator)


def jordan_block_sizes(M: IntMatrix, lam: Fraction) -> tuple[int, ...]:
    """Jordan block sizes for a rational eigenvalue, from ranks of (M - lam)^j."""
    A = _scaled_shift(M, Fraction(lam))
    ranks = [M.n]
    P = IntMatrix.identity(M.n)
    while True:
        P = P @ A
        r = rank(P.rows)
        if r == ranks[-1]:
            break
        ranks.append(r)
    at_least = [ranks[j - 1] - ranks[j] for j in range(1, len(ranks))] + [0]
    sizes = []
    for j in range(len(at_least) - 1):
        sizes.extend([j + 1] * (at_least[j] - at_least[j + 1]))
    return tuple(sorted(sizes, reverse=True))


def eigenspace(M: IntMatrix, lam) -> list[tuple[int, ...]]:
    lam = Fraction(lam)
    return nullspace(_scaled_shift(M, lam).rows, M.n)


def _poly_at_matrix(p: Poly, M: IntMatrix) -> IntMatrix:
    acc = IntMatrix.scalar(M.n, 0)
    for c in reversed(p.coeffs):
        acc = acc @ M + IntMatrix.scalar(M.n, c)
    return acc


def rational_spectrum(M: IntMatrix, width: Fraction = DEFAULT_WIDTH) -> Spectrum:
    """Exact rational eigenvalues plus certified enclosures of the rest."""
    width = Fraction(width)
    cp = char_poly(M)
    entries: list[SpectrumEntry] = []
    rest = cp
    for lam, mult in rational_roots(cp):
        blocks = jordan_block_sizes(M, lam)
        assert sum(blocks) == mult
        entries.append(SpectrumEntry(lam, mult, len(blocks), blocks))
        lin = Poly((-lam.numerator, lam.denominator))
        for _ in range(mult):
            rest = poly_quo(rest, lin)
    for S, mult in squarefree_decomposition(rest):
        geom, blocks = None, None
        if mult == 1:
            geom, blocks = 1, (1,)
        else:
            nullity = M.n - rank(_poly_at_matrix(S, M).rows)
            if nullity == S.degree * mult:
                geom, blocks = mult, (1,) * mult
            elif nullity == S.degree:
                geom, blocks = 1, (mult,)
        real = real_root_intervals(S, width)
        for lo, hi in real:
            entries.append(SpectrumEntry(RootBox(lo, hi, True), mult, geom, blocks))
        bits = max(64, width.denominator.bit_length() + 8)
        for (zr, zi), rsq in complex_root_discs(S, len(real), width):
            clo, chi = _sqrt_bounds(zr * zr + zi * zi, bits)
            _, rhi = _sqrt_bounds(rsq, bits)
            box = RootBox(
                max(Fraction(0), clo - rhi), chi + rhi, False,
                1 if zi > 0 else -1, complex(float(zr), float(zi)),
            )
            entries.append(SpectrumEntry(box, mult, geom, blocks))
    assert sum(e.algebraic_multiplicity for e in entries) == M.n

    def key(e: SpectrumEntry):
        lo, hi = e.modulus()
        if e.is_rational:
            sign = 0 if e.value >= 0 else 1
        else:
            sign = 0 if (e.value.real and e.value.lo >= 0) or e.value.imag_sign > 0 else 1
        return (-(lo + hi) / 2, 0 if e.is_rational else 1, sign)

    entries.sort(key=key)
    lo = max(e.modulus()[0] for e in entries)
    hi = max(e.modulus()[1] for e in entries)
    return Spectrum(tuple(entries), (lo, hi), cp)


def rational_eigenbasis(M: IntMatrix) -> list[tuple[Fraction, list[tuple[int, ...]]]]:
    """Eigenvalues with integral eigenbases, for M diagonalizable over Q."""
    spec = rational_spectrum(M)
    if not spec.all_rational:
        raise NotDiagonalizable("pullback has irrational eigenvalues")
    out = []
    for e in spec.entries:
        if e.geometric_multiplicity != e.algebraic_multiplicity:
            raise NotDiagonalizable(f"eigenvalue {e.value} has Jordan blocks {e.jordan_block_sizes}")
        out.append((e.value, eigenspace(M, e.value)))
    return out


def is_diagonalizable_over_C(M: IntMatrix) -> bool:
    """Sufficient test: squarefree characteristic polynomial, else exact block check."""
    cp = char_poly(M)
    if poly_gcd(cp, cp.derivative()).degree == 0:
        return True
    spec = rational_spectrum(M)
    return all(
        e.geometric_multiplicity is not None and e.geometric_multiplicity == e.algebraic_multiplicity
        for e in spec.entries
    )


# ---------------------------------------------------------------------------
# modulus comparison


class ModulusVerdict(enum.Enum):
    ALL_EQUAL = "AllEqual"
    NOT_ALL_EQUAL = "NotAllEqual"
    INCONCLUSIVE = "Inconclusive"


def _graeffe(p: Poly) -> Poly:
    """Polynomial whose roots are the squares of the roots of p."""
    n = p.degree
    neg = Poly(tuple(c if i % 2 == 0 else -c for i, c in enumerate(p.coeffs)))
    prod = poly_mul(p, neg)
    sq = prod.coeffs[::2]
    sign = -1 if n % 2 else 1
    return Poly(tuple(sign * c for c in sq))


def same_modulus_test(M: IntMatrix, width_budget=Fraction(1, 2**20)) -> ModulusVerdict:
    """Decide whether every eigenvalue of M has the same modulus."""
    width_budget = Fraction(width_budget)
    if M.is_zero():
        raise ValueError("same_modulus_test needs a nonzero matrix")
    spec = rational_spectrum(M, width_budget / 4)
    mods = [e.modulus() for e in spec.entries]
    if spec.all_rational:
        vals = {abs(e.value) for e in spec.entries}
        return ModulusVerdict.ALL_EQUAL if len(vals) == 1 else ModulusVerdict.NOT_ALL_EQUAL
    for i in range(len(mods)):
        for j in range(i + 1, len(mods)):
            if mods[i][1] < mods[j][0] or mods[j][1] < mods[i][0]:
                return ModulusVerdict.NOT_ALL_EQUAL
    if all(e.is_rational or e.value.real for e in spec.entries):
        # all roots real: moduli agree iff the Graeffe square collapses to (y - c)^n
        g = _graeffe(spec.char_poly)
        n = g.degree
        c = Fraction(-g.coeffs[n - 1], n * g.leading)
        expected = [Fraction(math.comb(n, i)) * (-c) ** (n - i) * g.leading for i in range(n + 1)]
        if [Fraction(x) for x in g.coeffs] == expected:
            return ModulusVerdict.ALL_EQUAL
        return ModulusVerdict.NOT_ALL_EQUAL
    hull = max(m[1] for m in mods) - min(m[0] for m in mods)
    if hull <= width_budget:
        return ModulusVerdict.ALL_EQUAL
    return ModulusVerdict.INCONCLUSIVE


# ---------------------------------------------------------------------------
# Picard rank two


def integral_eigendivisor(M: IntMatrix, lam: int, mu: int | None = None) -> tuple[int, int]:
    """Integral lam-eigenvector (lam - mu, b) in a basis (L, H) with H a mu-eigenvector.

    Columns of M are the images of the basis vectors: M e1 = a e1 + b e2,
    M e2 = mu e2.
    """
    if M.n != 2:
        raise ValueError("integral_eigendivisor expects a 2x2 matrix")
    if M[0, 1] != 0:
        raise NotEigenpair("second basis vector is not an eigenvector (M[0][1] != 0)")
    if mu is None:
        mu = M[1, 1]
    elif M[1, 1] != mu:
        raise NotEigenpair(f"M e2 = {M.column(1)} is not {mu} * e2")
    if lam == mu:
        raise NotEigenpair("lambda must differ from mu")
    b = M[1, 0]
    v = (lam - mu, b)
    if M @ v != (lam * v[0], lam * v[1]):
        raise NotEigenpair(f"M v != {lam} v for v = {v}")
    return v
