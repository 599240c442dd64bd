"""Formal calculus of semistable degree-0 bundles on an elliptic curve.

A bundle is a direct sum of terms F_r (x) L with F_r the Atiyah bundle of rank
r and L a degree-0 line bundle taken from a finitely generated abelian group.
Decomposition multiplicities come from the character ring of SL2: F_r has the
character q^(r-1) + q^(r-3) + ... + q^(1-r), and products and symmetric
powers are decomposed greedily from the top weight.  These multiplicities are
a model (flagged as such in serialized output), validated by rank,
determinant and section counts.
"""
from __future__ import annotations

import enum
import math
from collections import Counter
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterator, Mapping, Sequence

from .errors import CombinatorialBudget

MODEL = "sl2-character-ring"
COMPOSITION_LIMIT = 10**6


@dataclass(frozen=True)
class Pic0Element:
    """Element of Z^a x Z/t_1 x ...; order 0 marks a free generator."""

    coords: tuple[int, ...]
    orders: tuple[int, ...]

    def __post_init__(self):
        if len(self.coords) != len(self.orders):
            raise ValueError("coords and orders differ in length")
        if any(t < 0 for t in self.orders):
            raise ValueError("orders must be nonnegative")
        reduced = tuple(c % t if t else c for c, t in zip(self.coords, self.orders))
        object.__setattr__(self, "coords", reduced)

    @classmethod
    def zero(cls, orders: Sequence[int]) -> "Pic0Element":
        return cls((0,) * len(orders), tuple(orders))

    def _check(self, other):
        if self.orders != other.orders:
            raise ValueError("elements of different groups")

    def __add__(self, other: "Pic0Element") -> "Pic0Element":
        self._check(other)
        return Pic0Element(tuple(a + b for a, b in zip(self.coords, other.coords)), self.orders)

    def __neg__(self):
        return Pic0Element(tuple(-a for a in self.coords), self.orders)

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, n: int) -> "Pic0Element":
        return Pic0Element(tuple(n * a for a in self.coords), self.orders)

    __rmul__ = __mul__

    @property
    def is_trivial(self) -> bool:
        return not any(self.coords)


@dataclass(frozen=True)
class Pic0Group:
    names: tuple[str, ...]
    orders: tuple[int, ...]

    def __post_init__(self):
        if len(self.names) != len(self.orders) or len(set(self.names)) != len(self.names):
            raise ValueError("generator names must be distinct and match the orders")

    @classmethod
    def free(cls, *names: str) -> "Pic0Group":
        return cls(tuple(names), (0,) * len(names))

    def element(self, exponents: Mapping[str, int] | None = None) -> Pic0Element:
        exponents = dict(exponents or {})
        unknown = set(exponents) - set(self.names)
        if unknown:
            raise KeyError(f"unknown generators {sorted(unknown)}")
        return Pic0Element(tuple(exponents.get(n, 0) for n in self.names), self.orders)

    @property
    def trivial(self) -> Pic0Element:
        return Pic0Element.zero(self.orders)

    def gen(self, name: str) -> Pic0Element:
        return self.element({name: 1})

    def format(self, L: Pic0Element) -> str:
        parts = []
        for n, c in zip(self.names, L.coords):
            if c:
                parts.append(n if c == 1 else f"{n}^{c}")
        return "*".join(parts) if parts else "O"


# ---------------------------------------------------------------------------
# characters


Character = Counter


def character(r: int) -> Character:
    if r < 1:
        raise ValueError("rank must be positive")
    return Counter({r - 1 - 2 * i: 1 for i in range(r)})


def char_mul(a: Character, b: Character) -> Character:
    out = Counter()
    for wa, ma in a.items():
        for wb, mb in b.items():
            out[wa + wb] += ma * mb
    return out


def decompose(chi: Character) -> Counter:
    """Multiplicity of each F_r in a character, peeling off the top weight."""
    chi = Counter({w: m for w, m in chi.items() if m})
    out = Counter()
    while chi:
        top = max(chi)
        m = chi[top]
        if m < 0 or top < 0:
            raise ValueError("not the character of a representation")
        out[top + 1] += m
        for i in range(top + 1):
            w = top - 2 * i
            chi[w] -= m
            if not chi[w]:
                del chi[w]
    return out


@lru_cache(maxsize=4096)
def _sym_char(d: int, r: int) -> tuple[tuple[int, int], ...]:
    # coefficient of t^d in prod_j 1/(1 - t q^{w_j}), one weight at a time
    table = [Counter() for _ in range(d + 1)]
    table[0][0] = 1
    for w in range(r - 1, -r, -2):
        for k in range(1, d + 1):
            for s, m in table[k - 1].items():
                table[k][s + w] += m
    return tuple(sorted(table[d].items()))


def sym_character(d: int, r: int) -> Character:
    if d < 0 or r < 1:
        raise ValueError("need d >= 0 and r >= 1")
    return Counter(dict(_sym_char(d, r)))


# ---------------------------------------------------------------------------
# bundles


@dataclass(frozen=True)
class AtiyahExpr:
    """Direct sum of F_r (x) L, stored as a sorted multiset of (r, L)."""

    terms: tuple[tuple[int, Pic0Element], ...]

    def __post_init__(self):
        for r, _ in self.terms:
            if r < 1:
                raise ValueError("ranks must be positive")
        orders = {L.orders for _, L in self.terms}
        if len(orders) > 1:
            raise ValueError("twists from different groups")
        object.__setattr__(self, "terms", tuple(sorted(self.terms, key=lambda t: (-t[0], t[1].coords))))

    @classmethod
    def of(cls, *terms: tuple[int, Pic0Element]) -> "AtiyahExpr":
        return cls(tuple(terms))

    @classmethod
    def from_counter(cls, mult: Mapping[int, int], L: Pic0Element) -> "AtiyahExpr":
        return cls(tuple((r, L) for r, m in mult.items() for _ in range(m)))

    @property
    def rank(self) -> int:
        return sum(r for r, _ in self.terms)

    @property
    def orders(self) -> tuple[int, ...] | None:
        return self.terms[0][1].orders if self.terms else None

    def __add__(self, other: "AtiyahExpr") -> "AtiyahExpr":
        return AtiyahExpr(self.terms + other.terms)

    def twist(self, L: Pic0Element) -> "AtiyahExpr":
        return AtiyahExpr(tuple((r, M + L) for r, M in self.terms))

    def tensor(self, other: "AtiyahExpr") -> "AtiyahExpr":
        out = []
        for r, L in self.terms:
            for s, M in other.terms:
                out.extend((t, L + M) for t in _tensor_ranks(r, s))
        return AtiyahExpr(tuple(out))

    def multiset(self) -> Counter:
        return Counter((r, L.coords) for r, L in self.terms)

    def format(self, group: Pic0Group | None = None) -> str:
        parts = []
        for r, L in self.terms:
            tw = group.format(L) if group else ("O" if L.is_trivial else str(list(L.coords)))
            parts.append(f"F_{r}" if tw == "O" else f"F_{r}*{tw}")
        return " + ".join(parts) if parts else "0"

    def __str__(self):
        return self.format()

    def to_dict(self, group: Pic0Group | None = None) -> dict:
        return {
            "model": MODEL,
            "rank": self.rank,
            "terms": [
                {"r": r, "twist": dict(zip(group.names, L.coords)) if group else list(L.coords)}
                for r, L in self.terms
            ],
            "text": self.format(group),
        }


@lru_cache(maxsize=None)
def _tensor_ranks(r: int, s: int) -> tuple[int, ...]:
    d = decompose(char_mul(character(r), character(s)))
    return tuple(sorted(d.elements(), reverse=True))


def atiyah_tensor(r: int, s: int, orders: Sequence[int] = ()) -> AtiyahExpr:
    """F_r (x) F_s = F_{r+s-1} + F_{r+s-3} + ... + F_{|r-s|+1}."""
    if r < 1 or s < 1:
        raise ValueError("ranks must be positive")
    O = Pic0Element.zero(orders)
    return AtiyahExpr(tuple((t, O) for t in _tensor_ranks(r, s)))


def atiyah_sym(d: int, r: int, orders: Sequence[int] = ()) -> AtiyahExpr:
    """Sym^d F_r, all twists trivial."""
    O = Pic0Element.zero(orders)
    return AtiyahExpr.from_counter(decompose(sym_character(d, r)), O)


def det_bundle(E: AtiyahExpr) -> Pic0Element:
    """det(F_r (x) L) = L^r; det F_r is trivial."""
    if not E.terms:
        raise ValueError("empty bundle has no group attached")
    total = Pic0Element.zero(E.orders)
    for r, L in E.terms:
        total = total + r * L
    return total


def h0(E: AtiyahExpr) -> int:
    """Each F_r (x) L has one section when L is trivial and none otherwise."""
    return sum(1 for _, L in E.terms if L.is_trivial)


def compositions(d: int, parts: int) -> Iterator[tuple[int, ...]]:
    if parts == 0:
        if d == 0:
            yield ()
        return
    if parts == 1:
        yield (d,)
        return
    for i in range(d, -1, -1):
        for rest in compositions(d - i, parts - 1):
            yield (i, *rest)


def _check_budget(d: int, parts: int):
    n = math.comb(d + parts - 1, parts - 1) if parts else 1
    if n > COMPOSITION_LIMIT:
        raise CombinatorialBudget(f"{n} compositions of {d} into {parts} parts exceed {COMPOSITION_LIMIT}")


def _composition_character(E: AtiyahExpr, comp: Sequence[int]) -> Character:
    chi = Counter({0: 1})
    for (r, _), i in zip(E.terms, comp):
        if i:
            chi = char_mul(chi, sym_character(i, r))
    return chi


def _composition_twist(E: AtiyahExpr, comp: Sequence[int]) -> Pic0Element:
    total = Pic0Element.zero(E.orders)
    for (_, L), i in zip(E.terms, comp):
        total = total + i * L
    return total


def sym_bundle(E: AtiyahExpr, d: int) -> AtiyahExpr:
    """Sym^d of a direct sum, expanded over compositions of d."""
    if d < 0:
        raise ValueError("d must be nonnegative")
    if not E.terms:
        raise ValueError("empty bundle")
    _check_budget(d, len(E.terms))
    out = []
    for comp in compositions(d, len(E.terms)):
        L = _composition_twist(E, comp)
        for r, m in decompose(_composition_character(E, comp)).items():
            out.extend([(r, L)] * m)
    return AtiyahExpr(tuple(out))


def anticanonical_h0(E: AtiyahExpr, m: int = 1) -> int:
    """h0(Sym^{m r} E (x) det(E)^{-m}) = h0(P(E), -m K).

    Only compositions whose twist cancels contribute; for those the number of
    Atiyah summands is read off the weights 0 and 1 of the character (each F_r
    has exactly one of them).
    """
    if m < 1:
        raise ValueError("m must be positive")
    r = E.rank
    _check_budget(m * r, len(E.terms))
    target = m * det_bundle(E)
    count = 0
    for comp in compositions(m * r, len(E.terms)):
        if (_composition_twist(E, comp) - target).is_trivial:
            chi = _composition_character(E, comp)
            count += chi.get(0, 0) + chi.get(1, 0)
    return count


class IitakaVerdict(enum.Enum):
    KAPPA0 = "kappa0"
    KAPPA_GE_1 = "kappa_ge_1"
    INDETERMINATE = "Indeterminate"


@dataclass(frozen=True)
class IitakaEstimate:
    verdict: IitakaVerdict
    sequence: tuple[int, ...]

    def to_dict(self) -> dict:
        return {"verdict": self.verdict.value, "h0_sequence": list(self.sequence), "model": MODEL}


def iitaka_estimate(E: AtiyahExpr, m_max: int = 6) -> IitakaEstimate:
    """Read kappa(-K) off h0(-mK), m = 1..m_max (at most 8).

    Constant and positive gives kappa0; strictly increasing over the second
    half of the range gives kappa_ge_1; anything else is Indeterminate.
    """
    if not 2 <= m_max <= 8:
        raise ValueError("m_max must lie in 2..8")
    seq = tuple(anticanonical_h0(E, m) for m in range(1, m_max + 1))
    if seq[0] >= 1 and len(set(seq)) == 1:
        verdict = IitakaVerdict.KAPPA0
    else:
        tail = seq[(m_max - 1) // 2 :]
        if seq[0] >= 1 and all(a < b for a, b in zip(tail, tail[1:])):
            verdict = IitakaVerdict.KAPPA_GE_1
        else:
            verdict = IitakaVerdict.INDETERMINATE
    return IitakaEstimate(verdict, seq)


def parse_bundle(spec: Mapping) -> tuple[Pic0Group, AtiyahExpr]:
    """``{generators: [{name, order}], terms: [{r, twist: {name: exponent}}]}``."""
    gens = spec.get("generators", [])
    group = Pic0Group(tuple(str(g["name"]) for g in gens), tuple(int(g.get("order", 0)) for g in gens))
    terms = [(int(t["r"]), group.element(t.get("twist") or {})) for t in spec["terms"]]
    return group, AtiyahExpr(tuple(terms))
