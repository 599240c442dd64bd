"""Rational polyhedral cones and the dilation criteria for cone-preserving maps.

Cones are stored by their extremal rays (primitive integer vectors).  Facet
normals come from a double-description pass and are cached on the instance;
the computation is deterministic, so concurrent first access at worst does
the same work twice and stores equal values.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Sequence

from .errors import ContradictionDetected, DimensionMismatch, PreconditionViolated, ZeroVector
from .exactlin import (
    IntMatrix,
    ModulusVerdict,
    eigenspace,
    primitive,
    rank,
    rational_spectrum,
    same_modulus_test,
    solve,
)

MAX_DIM = 8
MAX_RAYS = 64


def _dot(a, b):
    return sum(x * y for x, y in zip(a, b))


# ---------------------------------------------------------------------------
# exact LP feasibility


def feasible_point(A: Sequence[Sequence], b: Sequence) -> list[Fraction] | None:
    """Some z >= 0 with A z = b, or None.  Phase-one simplex, Bland's rule."""
    m = len(A)
    n = len(A[0]) if m else 0
    rows = []
    for i in range(m):
        r = [Fraction(x) for x in A[i]]
        rhs = Fraction(b[i])
        if rhs < 0:
            r = [-x for x in r]
            rhs = -rhs
        rows.append(r + [Fraction(1 if j == i else 0) for j in range(m)] + [rhs])
    basis = [n + i for i in range(m)]
    total = n + m
    # objective: minimise the sum of artificials; reduced costs in row form
    obj = [Fraction(0)] * (total + 1)
    for r in rows:
        for j in range(n):
            obj[j] -= r[j]
        obj[total] -= r[total]
    while True:
        enter = next((j for j in range(total) if obj[j] < 0), None)
        if enter is None:
            break
        best = None
        for i, r in enumerate(rows):
            if r[enter] > 0:
                ratio = r[total] / r[enter]
                if best is None or ratio < best[0] or (ratio == best[0] and basis[i] < basis[best[1]]):
                    best = (ratio, i)
        if best is None:  # unbounded: cannot happen for phase one
            break
        i = best[1]
        piv = rows[i][enter]
        rows[i] = [x / piv for x in rows[i]]
        for k in range(m):
            if k != i and rows[k][enter] != 0:
                f = rows[k][enter]
                rows[k] = [x - f * y for x, y in zip(rows[k], rows[i])]
        if obj[enter] != 0:
            f = obj[enter]
            obj = [x - f * y for x, y in zip(obj, rows[i])]
        basis[i] = enter
    if obj[total] != 0:
        return None
    z = [Fraction(0)] * n
    for i, bvar in enumerate(basis):
        if bvar < n:
            z[bvar] = rows[i][total]
    return z


def in_cone(x: Sequence, generators: Sequence[Sequence]) -> bool:
    """Exact membership of x in the cone generated by ``generators``."""
    if not generators:
        return not any(x)
    A = [list(col) for col in zip(*generators)]
    return feasible_point(A, list(x)) is not None


# ---------------------------------------------------------------------------
# double description


def dual_extreme_rays(vectors: Sequence[Sequence[int]]) -> list[tuple[int, ...]]:
    """Extreme rays of {y : <v, y> >= 0 for all v in vectors}.

    ``vectors`` must span the ambient space (so the result is a pointed cone).
    Applied to the rays of a proper cone this yields its facet normals;
    applied to facet normals it gives back the rays.
    """
    vectors = [tuple(v) for v in vectors]
    d = len(vectors[0])
    basis_idx: list[int] = []
    for i, v in enumerate(vectors):
        if rank([vectors[j] for j in basis_idx] + [v]) > len(basis_idx):
            basis_idx.append(i)
        if len(basis_idx) == d:
            break
    if len(basis_idx) < d:
        raise PreconditionViolated("constraint vectors do not span the ambient space")
    # initial cone: columns of the inverse of the chosen rows
    B = [vectors[i] for i in basis_idx]
    rays: list[tuple[tuple[int, ...], frozenset[int]]] = []
    for j in range(d):
        e = [1 if k == j else 0 for k in range(d)]
        col = solve(B, e)
        r = primitive(col)
        zero = frozenset(basis_idx[k] for k in range(d) if k != j)
        rays.append((r, zero))
    done = set(basis_idx)
    for idx, a in enumerate(vectors):
        if idx in done:
            continue
        vals = [_dot(a, r) for r, _ in rays]
        pos = [k for k, v in enumerate(vals) if v > 0]
        neg = [k for k, v in enumerate(vals) if v < 0]
        zer = [k for k, v in enumerate(vals) if v == 0]
        new = [rays[k] for k in pos] + [(rays[k][0], rays[k][1] | {idx}) for k in zer]
        for p in pos:
            for q in neg:
                common = rays[p][1] & rays[q][1]
                if len(common) < d - 2:
                    continue
                if any(k != p and k != q and common <= rays[k][1] for k in range(len(rays))):
                    continue
                vp, vq = vals[p], vals[q]
                comb = primitive([vp * y - vq * x for x, y in zip(rays[p][0], rays[q][0])])
                new.append((comb, common | {idx}))
        rays = new
        done.add(idx)
    return sorted({r for r, _ in rays})


# ---------------------------------------------------------------------------
# cones


@dataclass(frozen=True)
class RationalCone:
    """Finitely generated cone given by its extremal rays."""

    rays: tuple[tuple[int, ...], ...]
    ambient_dim: int = field(default=0)

    def __post_init__(self):
        rays = tuple(tuple(int(x) for x in r) for r in self.rays)
        object.__setattr__(self, "rays", rays)
        if not self.ambient_dim:
            if not rays:
                raise ValueError("empty cone needs an explicit ambient_dim")
            object.__setattr__(self, "ambient_dim", len(rays[0]))
        if any(len(r) != self.ambient_dim for r in rays):
            raise DimensionMismatch("rays of different lengths")

    @classmethod
    def orthant(cls, n: int) -> "RationalCone":
        return cls(tuple(tuple(1 if i == j else 0 for i in range(n)) for j in range(n)), n)

    @cached_property
    def is_full_dimensional(self) -> bool:
        return rank(self.rays) == self.ambient_dim

    @cached_property
    def is_pointed(self) -> bool:
        return not any(in_cone([-x for x in r], self.rays) for r in self.rays)

    @property
    def is_proper(self) -> bool:
        return self.is_pointed and self.is_full_dimensional

    @cached_property
    def facets(self) -> tuple[tuple[int, ...], ...]:
        """Inward facet normals (primitive); needs a proper cone."""
        if not self.is_proper:
            raise PreconditionViolated("facets are only computed for proper cones")
        if self.ambient_dim > MAX_DIM or len(self.rays) > MAX_RAYS:
            raise PreconditionViolated(f"cone exceeds desk-scale caps ({MAX_DIM} dims, {MAX_RAYS} rays)")
        return tuple(dual_extreme_rays(self.rays))

    def facet_rays(self) -> list[frozenset[int]]:
        """For each facet, the indices of the rays lying on it."""
        return [frozenset(i for i, r in enumerate(self.rays) if _dot(F, r) == 0) for F in self.facets]

    def faces(self) -> set[frozenset[int]]:
        """Proper faces as sets of ray indices (the origin is the empty set)."""
        faces = set(self.facet_rays())
        frontier = set(faces)
        while frontier:
            nxt = set()
            for a in frontier:
                for b in list(faces):
                    c = a & b
                    if c not in faces:
                        nxt.add(c)
            faces |= nxt
            frontier = nxt
        return faces

    def contains(self, x: Sequence) -> bool:
        if len(x) != self.ambient_dim:
            raise DimensionMismatch(f"vector of length {len(x)} in a {self.ambient_dim}-dim cone")
        if self.is_proper and self.ambient_dim <= MAX_DIM:
            return all(_dot(F, x) >= 0 for F in self.facets)
        return in_cone(x, self.rays)

    def interior_contains(self, x: Sequence) -> bool:
        return all(_dot(F, x) > 0 for F in self.facets)

    def to_list(self) -> list[list[int]]:
        return [list(r) for r in self.rays]


def canonicalize(generators: Sequence[Sequence[int]]) -> RationalCone:
    """Reduce a generating set to primitive, pairwise distinct extremal rays."""
    if not generators:
        raise ValueError("need at least one generator")
    d = len(generators[0])
    if any(len(g) != d for g in generators):
        raise DimensionMismatch("generators of different lengths")
    seen = []
    for g in generators:
        if not any(g):
            raise ZeroVector(f"zero generator {list(g)}")
        p = primitive(g)
        if p not in seen:
            seen.append(p)
    keep = list(seen)
    i = 0
    while i < len(keep):
        others = keep[:i] + keep[i + 1:]
        if others and in_cone(keep[i], others):
            keep.pop(i)
        else:
            i += 1
    return RationalCone(tuple(keep), d)


# ---------------------------------------------------------------------------
# maps on cones


class DilationVerdict(enum.Enum):
    DILATION = "Dilation"
    NOT_DILATION = "NotDilation"
    INCONCLUSIVE = "Inconclusive"


@dataclass(frozen=True)
class ConeMapReport:
    invariant: bool
    ray_permutation: tuple[int, ...] | None
    eigen_rays: tuple[tuple[int, Fraction], ...]
    verdict: DilationVerdict

    def to_dict(self) -> dict:
        return {
            "invariant": self.invariant,
            "ray_permutation": list(self.ray_permutation) if self.ray_permutation is not None else None,
            "eigen_rays": [[i, str(lam)] for i, lam in self.eigen_rays],
            "verdict": self.verdict.value,
        }


def _check_dims(M: IntMatrix, C: RationalCone):
    if M.n != C.ambient_dim:
        raise DimensionMismatch(f"{M.n}x{M.n} matrix on a cone in dimension {C.ambient_dim}")


def _proportional(v, r) -> Fraction | None:
    """c > 0 with v = c r, else None."""
    c = None
    for a, b in zip(v, r):
        if b == 0:
            if a != 0:
                return None
            continue
        q = Fraction(a, b)
        if c is None:
            c = q
        elif q != c:
            return None
    if c is None or c <= 0:
        return None
    return c


def map_cone(M: IntMatrix, C: RationalCone) -> ConeMapReport:
    """Invariance of C under M, the induced ray permutation and ray eigenvalues."""
    _check_dims(M, C)
    if M.det() == 0:
        raise PreconditionViolated("map_cone needs M invertible over Q")
    images = [M @ r for r in C.rays]
    invariant = all(C.contains(v) for v in images)
    perm: list[int] | None = []
    eig = []
    for i, v in enumerate(images):
        hit = None
        for j, r in enumerate(C.rays):
            c = _proportional(v, r)
            if c is not None:
                hit = (j, c)
                break
        if hit is None:
            perm = None
            break
        perm.append(hit[0])
        if hit[0] == i:
            eig.append((i, hit[1]))
    if perm is not None and len(set(perm)) != len(perm):
        perm = None
    if perm is None:
        # eigen rays are still meaningful without a full permutation
        eig = []
        for i, v in enumerate(images):
            c = _proportional(v, C.rays[i])
            if c is not None:
                eig.append((i, c))
    if not invariant:
        verdict = DilationVerdict.NOT_DILATION
    elif C.is_proper:
        verdict = dilation_criterion(M, C).verdict
    else:
        verdict = DilationVerdict.INCONCLUSIVE
    return ConeMapReport(invariant, tuple(perm) if perm is not None else None, tuple(eig), verdict)


def _all_rays_fixed(M: IntMatrix, C: RationalCone) -> dict[int, Fraction]:
    report = map_cone(M, C)
    fixed = dict(report.eigen_rays)
    if len(fixed) != len(C.rays):
        raise PreconditionViolated("M does not fix every ray of the cone")
    return fixed


@dataclass(frozen=True)
class SeparationResult:
    separates: bool
    eigen_rays: tuple[int, ...]
    witness: tuple[tuple[int, ...], tuple[int, ...]] | None

    def __bool__(self):
        return self.separates


def separates_eigenspace(M: IntMatrix, C: RationalCone, lam) -> SeparationResult:
    """Whether C separates the lam-eigenspace of a ray-fixing M.

    Every lam-eigenvector in C is a nonnegative combination of lam-eigen rays
    (eigenspaces of distinct eigenvalues are independent and C is pointed).
    Two such vectors avoid a common proper face exactly when the lam-rays do
    not all lie on one facet; the witness splits them as (first ray, sum of
    the rest).
    """
    _check_dims(M, C)
    if not C.is_proper:
        raise PreconditionViolated("separation is defined for proper cones")
    fixed = _all_rays_fixed(M, C)
    lam = Fraction(lam)
    idx = tuple(i for i, mu in sorted(fixed.items()) if mu == lam)
    if len(idx) < 2 and not (len(idx) == 1 and len(C.rays) == 1):
        return SeparationResult(False, idx, None)
    on_one_facet = any(set(idx) <= f for f in C.facet_rays())
    if on_one_facet:
        return SeparationResult(False, idx, None)
    v = C.rays[idx[0]]
    w = tuple(sum(C.rays[i][k] for i in idx[1:]) for k in range(C.ambient_dim))
    return SeparationResult(True, idx, (v, w))


@dataclass(frozen=True)
class DilationResult:
    verdict: DilationVerdict
    witness: tuple[int, ...] | None
    eigenvalue: Fraction | None
    modulus: ModulusVerdict
    cone_condition: bool

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict.value,
            "witness": list(self.witness) if self.witness is not None else None,
            "eigenvalue": str(self.eigenvalue) if self.eigenvalue is not None else None,
            "same_modulus": self.modulus.value,
            "interior_eigenvector_and_equal_moduli": self.cone_condition,
        }


def interior_eigenvector(M: IntMatrix, C: RationalCone, lam) -> tuple[int, ...] | None:
    """A lam-eigenvector strictly inside C, found by exact LP, or None."""
    basis = eigenspace(M, lam)
    if not basis:
        return None
    # prefer the sum of the lam-eigen rays when it is interior
    rays = [r for r in C.rays if M @ r == tuple(Fraction(lam) * x for x in r)]
    if rays:
        s = tuple(sum(col) for col in zip(*rays))
        if C.interior_contains(s):
            return primitive(s)
    FB = [[_dot(F, b) for b in basis] for F in C.facets]
    # F.(B c) - slack = 1, c = c+ - c-
    A = [row + [-x for x in row] + [-1 if j == i else 0 for j in range(len(FB))] for i, row in enumerate(FB)]
    z = feasible_point(A, [1] * len(FB))
    if z is None:
        return None
    k = len(basis)
    c = [z[i] - z[k + i] for i in range(k)]
    v = [sum(c[i] * basis[i][t] for i in range(k)) for t in range(M.n)]
    return primitive(v)


def dilation_criterion(M: IntMatrix, C: RationalCone, width_budget=Fraction(1, 2**20)) -> DilationResult:
    """Decide whether M acts on the proper invariant cone C by a dilation.

    The cone-theoretic condition (an interior eigenvector plus equal moduli)
    is checked exactly for rational eigenvalues; a dilation additionally has
    every eigenvalue equal to the interior one.
    """
    _check_dims(M, C)
    if not C.is_proper:
        raise PreconditionViolated("dilation_criterion needs a proper cone")
    if not all(C.contains(M @ r) for r in C.rays):
        raise PreconditionViolated("M does not map C into itself")
    spec = rational_spectrum(M)
    witness, lam = None, None
    for e in spec.entries:
        if e.is_rational and e.value > 0:
            w = interior_eigenvector(M, C, e.value)
            if w is not None:
                witness, lam = w, e.value
                break
    modulus = same_modulus_test(M, width_budget)
    cone_condition = witness is not None and modulus is ModulusVerdict.ALL_EQUAL
    if witness is not None and modulus is ModulusVerdict.INCONCLUSIVE:
        verdict = DilationVerdict.INCONCLUSIVE
    elif cone_condition and lam.denominator == 1 and M == IntMatrix.scalar(M.n, lam.numerator):
        verdict = DilationVerdict.DILATION
    else:
        verdict = DilationVerdict.NOT_DILATION
    return DilationResult(verdict, witness, lam, modulus, cone_condition)


class RayCountVerdict(enum.Enum):
    FORCED_DILATION = "ForcedDilation"
    CRITERION_SILENT = "CriterionSilent"


@dataclass(frozen=True)
class RayCountReport:
    s: int
    t: int
    q: int
    verdict: RayCountVerdict
    ray_eigenvalues: tuple[Fraction, ...]

    def to_dict(self) -> dict:
        return {
            "s": self.s,
            "t": self.t,
            "q": self.q,
            "verdict": self.verdict.value,
            "ray_eigenvalues": [str(x) for x in self.ray_eigenvalues],
        }


def ray_count_criterion(M: IntMatrix, C: RationalCone) -> RayCountReport:
    """Rays-versus-facets count forcing a dilation (s >= t q + 1)."""
    _check_dims(M, C)
    if not C.is_proper:
        raise PreconditionViolated("ray_count_criterion needs a proper cone")
    fixed = _all_rays_fixed(M, C)
    eigs = tuple(fixed[i] for i in range(len(C.rays)))
    if any(x <= 0 for x in eigs):
        raise PreconditionViolated("ray eigenvalues must be positive (iterate first)")
    s = len(C.rays)
    t = len(set(eigs))
    q = max(len(f) for f in C.facet_rays())
    if s >= t * q + 1:
        if t != 1:
            raise ContradictionDetected(
                f"s={s} >= t*q+1={t * q + 1} but the ray eigenvalues {sorted(set(eigs))} differ"
            )
        return RayCountReport(s, t, q, RayCountVerdict.FORCED_DILATION, eigs)
    return RayCountReport(s, t, q, RayCountVerdict.CRITERION_SILENT, eigs)
