"""Orbit membership labels, stabilizer search, and orbit partitioning.

Two forms with nonzero discriminant lie in the same geometric SL2-orbit of
the projective space of degree-n forms iff their root configurations on the
projective line are Moebius equivalent.  For n = 3 any three distinct points
are equivalent; for n = 4 the projective pair [I^3 : J^2] of the classical
quartic invariants

    I = 12 a0 a4 - 3 a1 a3 + a2^2
    J = 72 a0 a2 a4 + 9 a1 a2 a3 - 27 a0 a3^2 - 27 a4 a1^2 - 2 a2^3

is a complete exact invariant.  For n >= 5 a numerical signature built from
the j-invariants of all 4-element subsets of roots is used; it is advisory
only (a documented rounding tolerance, not a certificate).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

from .enumeration import iter_group_elements
from .forms import BinaryForm, GroupElement, act, discriminant, normalize_primitive, primitive_key
from .heights import (
    BoundaryDivisorError,
    NotSIntegralError,
    PlaceSet,
    is_s_integral,
    weighted_norm_square,
)

__all__ = [
    "OrbitLabel",
    "StabilizerReport",
    "SearchBudget",
    "OrbitPartition",
    "quartic_invariants",
    "orbit_label",
    "stabilizer_search",
    "orbit_partition",
]

SIGNATURE_DIGITS = 12  # significant digits kept by the numerical n >= 5 signature


@dataclass(frozen=True)
class OrbitLabel:
    degree: int
    kind: str  # "all-distinct" | "quartic-invariants" | "root-signature"
    key: tuple
    certified: bool

    def __eq__(self, other):
        if not isinstance(other, OrbitLabel):
            return NotImplemented
        return (self.degree, self.kind, self.key) == (other.degree, other.kind, other.key)

    def __hash__(self):
        return hash((self.degree, self.kind, self.key))


def quartic_invariants(f: BinaryForm) -> tuple[Fraction, Fraction]:
    """The classical degree-2 and degree-3 invariants (I, J) of a quartic;
    27 disc = 4 I^3 - J^2."""
    if f.degree != 4:
        raise ValueError("quartic invariants require degree 4")
    a0, a1, a2, a3, a4 = f.coeffs
    I = 12 * a0 * a4 - 3 * a1 * a3 + a2 * a2
    J = 72 * a0 * a2 * a4 + 9 * a1 * a2 * a3 - 27 * a0 * a3 * a3 - 27 * a4 * a1 * a1 - 2 * a2**3
    return I, J


def _projective_roots(f: BinaryForm, dps: int = 50) -> list[tuple[complex, complex]]:
    """Roots of f on the projective line in homogeneous coordinates,
    computed at high precision (mpmath)."""
    import mpmath

    coeffs = [Fraction(c) for c in f.coeffs]
    lead_zeros = 0
    while coeffs[lead_zeros] == 0:
        lead_zeros += 1
    roots: list[tuple[complex, complex]] = [(complex(1), complex(0))] * lead_zeros
    poly = [mpmath.mpf(c.numerator) / mpmath.mpf(c.denominator) for c in coeffs[lead_zeros:]]
    if len(poly) > 1:
        with mpmath.workdps(dps):
            for r in mpmath.polyroots(poly, maxsteps=200, extraprec=200):
                roots.append((complex(r), complex(1)))
    return roots


def _cross_ratio(p1, p2, p3, p4) -> complex:
    def det(p, q):
        return p[0] * q[1] - q[0] * p[1]

    return (det(p1, p3) * det(p2, p4)) / (det(p1, p4) * det(p2, p3))


def _j_of_four(points) -> complex:
    lam = _cross_ratio(*points)
    num = 256 * (lam * lam - lam + 1) ** 3
    den = (lam * (1 - lam)) ** 2
    return num / den


def _round_sig(x: float, sig: int) -> float:
    if x == 0.0 or not math.isfinite(x):
        return 0.0 if x == 0.0 else x
    return round(x, sig - 1 - math.floor(math.log10(abs(x))))


def _root_signature(f: BinaryForm, sig: int = 12) -> tuple:
    """Sorted multiset of j-invariants of 4-subsets of roots, rounded to
    `sig` significant digits; Moebius invariant of the root configuration."""
    from itertools import combinations

    roots = _projective_roots(f)
    js = []
    for quad in combinations(roots, 4):
        j = _j_of_four(quad)
        js.append((_round_sig(j.real, sig), _round_sig(j.imag, sig)))
    js.sort()
    return tuple(js)


def orbit_label(f: BinaryForm) -> OrbitLabel:
    """Canonical datum of the geometric SL2-orbit of [f]; exact for degrees
    3 and 4, numerical (advisory) for degree >= 5."""
    if discriminant(f) == 0:
        raise BoundaryDivisorError("orbit labels are defined off the discriminant divisor")
    n = f.degree
    if n == 3:
        return OrbitLabel(3, "all-distinct", (), True)
    if n == 4:
        I, J = quartic_invariants(f)
        i3, j2 = I**3, J * J
        if j2 == 0:
            key = ("inf",)
        else:
            key = (i3 / j2,)
        return OrbitLabel(4, "quartic-invariants", key, True)
    return OrbitLabel(n, "root-signature", _root_signature(f, SIGNATURE_DIGITS), False)


@dataclass(frozen=True)
class SearchBudget:
    entry_bound: int = 3
    denominator_exponent: int = 1


@dataclass(frozen=True)
class StabilizerReport:
    elements_found: tuple
    order_lower_bound: int
    budget: SearchBudget
    note: str = "lower bound only: elements outside the search budget are not excluded"


def stabilizer_search(f: BinaryForm, S: PlaceSet, bound: SearchBudget) -> StabilizerReport:
    """All g in SL2(Z_S) within the budget fixing [f] projectively
    (normalize(act(g, f)) = +-normalize(f)); includes the identity."""
    if discriminant(f) == 0:
        raise BoundaryDivisorError("stabilizer search requires nonzero discriminant")
    base = primitive_key(f)
    exps = {p: bound.denominator_exponent for p in S.primes}
    found = []
    for g in iter_group_elements(S, bound.entry_bound, exps):
        if primitive_key(act(g, f)) == base:
            found.append(g)
    return StabilizerReport(tuple(found), len(found), bound)


@dataclass(frozen=True)
class OrbitPartition:
    points: tuple
    classes: tuple  # tuple of tuples of indices into points
    generators_used: str
    closure_bound: Fraction

    def class_of(self, idx: int) -> tuple:
        for cls in self.classes:
            if idx in cls:
                return cls
        raise KeyError(idx)

    def to_json(self) -> dict:
        return {
            "points": [p.to_json() for p in self.points],
            "classes": [list(c) for c in self.classes],
            "generators_used": self.generators_used,
            "closure_bound": str(self.closure_bound),
        }


def _shear_generators(S: PlaceSet) -> list[GroupElement]:
    gens = []
    steps = [Fraction(1)] + [Fraction(1, p) for p in S.primes]
    for s in steps:
        for sgn in (1, -1):
            gens.append(GroupElement.of(1, sgn * s, 0, 1))
            gens.append(GroupElement.of(1, 0, sgn * s, 1))
    return gens


class _UnionFind:
    def __init__(self):
        self.parent: dict = {}

    def find(self, x):
        while self.parent.setdefault(x, x) != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def union(self, x, y):
        rx, ry = self.find(x), self.find(y)
        if rx != ry:
            self.parent[rx] = ry


def orbit_partition(points: list, S: PlaceSet, closure_bound) -> OrbitPartition:
    """Breadth-first closure of the point set under the shear generators of
    SL2(Z_S), discarding images whose weighted norm exceeds closure_bound.
    The result refines the true orbit partition (classes may over-split when
    the bound is too small, never under-split)."""
    closure_bound = Fraction(closure_bound)
    keys = []
    for p in points:
        ok, cert = is_s_integral(p, S)
        if not ok:
            raise NotSIntegralError(f"point {p.to_json()} is not S-integral: {cert.reason}")
        keys.append(primitive_key(p))
    gens = _shear_generators(S)
    thr = closure_bound * closure_bound
    uf = _UnionFind()
    frontier = list(dict.fromkeys(keys))
    visited = set(frontier)
    while frontier:
        nxt = []
        for key in frontier:
            base = BinaryForm(tuple(Fraction(c) for c in key))
            for g in gens:
                img = normalize_primitive(act(g, base))
                if weighted_norm_square(img) > thr:
                    continue
                ikey = tuple(int(c) for c in img.coeffs)
                uf.union(key, ikey)
                if ikey not in visited:
                    visited.add(ikey)
                    nxt.append(ikey)
        frontier = nxt
    groups: dict = {}
    for idx, key in enumerate(keys):
        groups.setdefault(uf.find(key), []).append(idx)
    classes = tuple(tuple(sorted(g)) for g in sorted(groups.values()))
    return OrbitPartition(
        points=tuple(points),
        classes=classes,
        generators_used=(
            "upper/lower shears by 1 and by 1/p for p in "
            + (", ".join(str(p) for p in S.primes) if S.primes else "{}")
        ),
        closure_bound=closure_bound,
    )
