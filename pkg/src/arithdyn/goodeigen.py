"""Four-condition test for a good top eigenspace of a pullback action."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

from .atiyah import AtiyahExpr, IitakaVerdict, iitaka_estimate
from .cones import RationalCone, map_cone
from .dynsys import ModelSystem
from .errors import OracleUnavailable
from .exactlin import (
    IntMatrix,
    Poly,
    RootBox,
    Spectrum,
    eigenspace,
    poly_gcd,
    rank,
    rational_spectrum,
    real_root_intervals,
    squarefree_decomposition,
)

FINE_WIDTH = Fraction(1, 2**60)

KappaOracle = Callable[[Sequence[int]], int]


def model_kappa(D: Sequence[int]) -> int:
    """Iitaka dimension of a_1 H_1 + ... + a_k H_k on (P^1)^k for a_i >= 0."""
    if any(a < 0 for a in D):
        raise OracleUnavailable(f"class {list(D)} is not effective on the product model")
    return sum(1 for a in D if a > 0)


def projective_bundle_kappa(E: AtiyahExpr, m_max: int = 6) -> KappaOracle:
    """Oracle on P(E) over an elliptic curve, basis (xi, fiber).

    Only the anticanonical ray (rank(E), 0) is answered; it is read off the
    growth of h0(-mK).
    """
    est = iitaka_estimate(E, m_max)

    def oracle(D: Sequence[int]) -> int:
        if len(D) != 2 or D[1] != 0 or D[0] <= 0:
            raise OracleUnavailable(f"class {list(D)} is not on the anticanonical ray")
        if est.verdict is IitakaVerdict.KAPPA0:
            return 0
        if est.verdict is IitakaVerdict.KAPPA_GE_1:
            return 1
        raise OracleUnavailable(f"h0(-mK) sequence {est.sequence} is indeterminate")

    return oracle


class Verdict(enum.Enum):
    GOOD = "Good"
    NOT_GOOD = "NotGood"
    NOT_APPLICABLE = "NotApplicable"
    INCONCLUSIVE = "Inconclusive"


@dataclass(frozen=True)
class GoodEigenspaceReport:
    verdict: Verdict
    eigenvalue: str | None
    conditions: tuple[bool | None, bool | None, bool | None, bool | None]
    evidence: dict = field(default_factory=dict)
    basis: tuple[tuple[int, ...], ...] = ()

    @property
    def good(self) -> bool:
        return self.verdict is Verdict.GOOD

    def to_dict(self) -> dict:
        names = ("unique_top_modulus", "semisimple_top_blocks", "integral_nef_eigenbasis", "some_kappa_nonzero")
        return {
            "verdict": self.verdict.value,
            "eigenvalue": self.eigenvalue,
            "conditions": dict(zip(names, self.conditions)),
            "evidence": self.evidence,
            "basis": [list(b) for b in self.basis],
        }


def _negated(p: Poly) -> Poly:
    return Poly(tuple(c if i % 2 == 0 else -c for i, c in enumerate(p.coeffs)))


def _overlap(a: tuple[Fraction, Fraction], b: tuple[Fraction, Fraction]) -> bool:
    return a[0] <= b[1] and b[0] <= a[1]


def _real_tie(cp: Poly, box: RootBox) -> bool:
    """Whether -alpha is also a root, alpha the real root isolated by ``box``."""
    h = poly_gcd(cp, _negated(cp))
    if h.degree == 0:
        return False
    for S, _ in squarefree_decomposition(h):
        for iv in real_root_intervals(S, FINE_WIDTH):
            if _overlap(iv, (box.lo, box.hi)):
                return True
    return False


def _top_unique(spec: Spectrum) -> tuple[bool | None, str]:
    top = spec.entries[0]
    if not top.is_rational and not top.value.real:
        return False, "top eigenvalue is non-real; its conjugate has the same modulus"
    tlo, thi = top.modulus()
    for e in spec.entries[1:]:
        lo, hi = e.modulus()
        if hi < tlo:
            continue
        if top.is_rational and e.is_rational:
            if abs(e.value) == abs(top.value):
                return False, f"eigenvalues {top.value} and {e.value} share the top modulus"
            continue
        if not top.is_rational and e.is_rational is False and e.value.real and _real_tie(spec.char_poly, top.value):
            return False, "a real irrational top eigenvalue and its negative are both roots"
        return None, "moduli not separated at the working width"
    return True, "top modulus separated from the rest of the spectrum"


def good_eigenspace_check(
    system: ModelSystem | None = None,
    *,
    matrix: IntMatrix | Sequence[Sequence[int]] | None = None,
    cone: RationalCone | None = None,
    kappa: KappaOracle | None = None,
) -> GoodEigenspaceReport:
    """Evaluate the four good-eigenspace conditions at the top eigenvalue.

    A model system brings its own data: the pullback matrix, the orthant as
    nef cone and the product-model kappa rule.  Otherwise a matrix, cone and
    kappa oracle must all be given.
    """
    if system is not None:
        M, C, kappa = system.pullback, RationalCone.orthant(system.k), kappa or model_kappa
    else:
        if matrix is None or cone is None:
            raise ValueError("give a model system or a matrix with its cone")
        if kappa is None:
            raise OracleUnavailable("no Iitaka-dimension oracle for this input")
        M = matrix if isinstance(matrix, IntMatrix) else IntMatrix(tuple(tuple(r) for r in matrix))
        C = cone
    spec = rational_spectrum(M)
    top = spec.entries[0]
    evidence: dict = {"spectrum": spec.to_dict()}
    if spec.spectral_radius[1] <= 1:
        evidence["reason"] = "spectral radius is at most 1"
        return GoodEigenspaceReport(Verdict.NOT_APPLICABLE, None, (None, None, None, None), evidence)
    lam_text = str(top.value) if top.is_rational else "irrational"

    c1, evidence["1"] = _top_unique(spec)

    blocks = top.jordan_block_sizes
    c2 = None if blocks is None else all(b == 1 for b in blocks)
    evidence["2"] = f"Jordan blocks {list(blocks) if blocks is not None else 'unknown'}"

    basis: tuple[tuple[int, ...], ...] = ()
    if not top.is_rational:
        c3 = False
        evidence["3"] = "no rational eigenvectors for an irrational eigenvalue"
    else:
        lam = top.value
        geom = len(eigenspace(M, lam))
        rays = []
        if M.det() != 0:
            rays = [C.rays[i] for i, mu in map_cone(M, C).eigen_rays if mu == lam]
        if rays and rank(rays) == geom:
            basis = tuple(rays)
            c3 = True
            evidence["3"] = "eigenspace spanned by fixed extremal rays of the cone"
        else:
            cand = []
            for v in eigenspace(M, lam):
                if C.contains(v):
                    cand.append(v)
                elif C.contains(tuple(-x for x in v)):
                    cand.append(tuple(-x for x in v))
            c3 = len(cand) == geom
            basis = tuple(cand) if c3 else ()
            evidence["3"] = (
                "canonical eigenbasis lies in the cone" if c3 else "canonical eigenbasis leaves the cone"
            )

    if basis:
        kappas = [kappa(D) for D in basis]
        c4 = any(k != 0 for k in kappas)
        evidence["4"] = {str(list(D)): k for D, k in zip(basis, kappas)}
    else:
        c4 = False
        evidence["4"] = "no integral nef eigenbasis to test"

    conds = (c1, c2, c3, c4)
    if all(c is True for c in conds):
        verdict = Verdict.GOOD
    elif any(c is False for c in conds):
        verdict = Verdict.NOT_GOOD
    else:
        verdict = Verdict.INCONCLUSIVE
    return GoodEigenspaceReport(verdict, lam_text, conds, evidence, basis)
