"""Exact local and global heights for binary forms off the discriminant locus.

Local heights (for a point [a_0 : ... : a_n] with disc != 0):

    nonarchimedean:  H_p = max_i |a_i|_p / |disc(a)|_p^{1/(2n-2)}
    archimedean:     H_oo = sqrt(sum_i binom(n,i)^{-1} a_i^2) / |disc(a)|^{1/(2n-2)}

Roots are never extracted: every height is carried as its (2n-2)-th power,
which is an exact rational for rational points.  A threshold T is compared
as power_value <= T^{2n-2}.  For a primitive integer form whose
discriminant is an S-unit, the p-adic and archimedean discriminant parts
cancel in the product over S and the global height reduces to the weighted
coefficient norm:  H^{2n-2} = (sum_i binom(n,i)^{-1} a_i^2)^{n-1}.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

from .forms import (
    INFINITY,
    BinaryForm,
    PAdicValuation,
    discriminant,
    is_prime,
    normalize_primitive,
    rational_to_string,
    valuation,
)

__all__ = [
    "PlaceSet",
    "ExactHeight",
    "LocalHeightBreakdown",
    "BoundaryDivisorError",
    "NotSIntegralError",
    "SIntegralityCertificate",
    "local_height",
    "local_height_breakdown",
    "global_height",
    "is_s_integral",
    "weighted_norm_identity_check",
    "weighted_norm_power",
    "weighted_norm_square",
]


class BoundaryDivisorError(ValueError):
    """Height requested at a point on the discriminant divisor."""


class NotSIntegralError(ValueError):
    """Operation requires an S-integral form."""


@dataclass(frozen=True)
class PlaceSet:
    """Finite set of places: the archimedean place plus distinct primes."""

    primes: tuple[int, ...]

    def __post_init__(self):
        ps = tuple(sorted(set(int(p) for p in self.primes)))
        for p in ps:
            if not is_prime(p):
                raise ValueError(f"{p} is not prime")
        object.__setattr__(self, "primes", ps)

    @property
    def includes_infinity(self) -> bool:
        return True

    @classmethod
    def of(cls, *primes: int) -> "PlaceSet":
        return cls(tuple(primes))

    def places(self) -> tuple:
        return (INFINITY,) + self.primes

    def __len__(self) -> int:
        return 1 + len(self.primes)

    def __contains__(self, place) -> bool:
        return place == INFINITY or place in self.primes

    def label(self) -> str:
        return "{oo" + "".join(f",{p}" for p in self.primes) + "}"


@dataclass(frozen=True)
class ExactHeight:
    """A height stored as its exact (2n-2)-th power."""

    power_value: Fraction
    degree_scale: int  # 2n-2

    def __post_init__(self):
        object.__setattr__(self, "power_value", Fraction(self.power_value))
        if self.power_value <= 0:
            raise ValueError("height powers must be positive")

    def __mul__(self, other: "ExactHeight") -> "ExactHeight":
        if self.degree_scale != other.degree_scale:
            raise ValueError("cannot multiply heights with different scales")
        return ExactHeight(self.power_value * other.power_value, self.degree_scale)

    def compare_threshold(self, T) -> int:
        """-1/0/+1 for height < T, = T, > T; exact."""
        rhs = Fraction(T) ** self.degree_scale
        if self.power_value < rhs:
            return -1
        return 0 if self.power_value == rhs else 1

    def leq(self, T) -> bool:
        return self.compare_threshold(T) <= 0

    def to_float(self) -> float:
        return float(self.power_value) ** (1.0 / self.degree_scale)

    def to_json(self) -> dict:
        return {"power": rational_to_string(self.power_value), "scale": self.degree_scale}


@dataclass(frozen=True)
class LocalHeightBreakdown:
    """The two factors of a local height power: norm part over |disc|_v."""

    place: object
    numerator_part: Fraction  # (norm term)^{2n-2}
    discriminant_part: Fraction  # |disc(a)|_v
    scale: int  # 2n-2

    def reassemble(self) -> ExactHeight:
        return ExactHeight(self.numerator_part / self.discriminant_part, self.scale)


def _binomials(n: int) -> list[int]:
    return [math.comb(n, i) for i in range(n + 1)]


def weighted_norm_square(f: BinaryForm) -> Fraction:
    """sum_i binom(n,i)^{-1} a_i^2, the rotation-invariant norm squared."""
    n = f.degree
    return sum(c * c / b for c, b in zip(f.coeffs, _binomials(n)))


def weighted_norm_power(f: BinaryForm) -> Fraction:
    """(sum_i binom(n,i)^{-1} a_i^2)^{n-1} = (weighted norm)^{2n-2}."""
    return weighted_norm_square(f) ** (f.degree - 1)


def local_height_breakdown(f: BinaryForm, place) -> LocalHeightBreakdown:
    disc = discriminant(f)
    if disc == 0:
        raise BoundaryDivisorError("point lies on the discriminant divisor")
    n = f.degree
    scale = 2 * n - 2
    if place == INFINITY:
        num = weighted_norm_power(f)
        dpart = abs(disc)
    else:
        if not (isinstance(place, int) and is_prime(place)):
            raise ValueError(f"invalid place {place!r}")
        maxabs = max(valuation(c, place).absolute_value() for c in f.coeffs)
        num = maxabs**scale
        dpart = valuation(disc, place).absolute_value()
    return LocalHeightBreakdown(place, Fraction(num), Fraction(dpart), scale)


def local_height(f: BinaryForm, place) -> ExactHeight:
    """H_v([f]) as an exact (2n-2)-th power; projectively well defined."""
    b = local_height_breakdown(f, place)
    return ExactHeight(b.numerator_part / b.discriminant_part, 2 * f.degree - 2)


def global_height(f: BinaryForm, S: PlaceSet) -> ExactHeight:
    """Product of local heights over the places of S."""
    out = local_height(f, INFINITY)
    for p in S.primes:
        out = out * local_height(f, p)
    return out


@dataclass(frozen=True)
class SIntegralityCertificate:
    """Exponent data disc = sign * prod p^{e_p}, or the failure reason."""

    ok: bool
    sign: int
    exponents: dict[int, int]
    reason: str = ""

    def to_json(self) -> dict:
        return {
            "ok": self.ok,
            "sign": self.sign,
            "exponents": {str(p): e for p, e in sorted(self.exponents.items())},
            "reason": self.reason,
        }


def is_s_integral(f: BinaryForm, S: PlaceSet) -> tuple[bool, SIntegralityCertificate]:
    """True iff the primitive integer representative of [f] has discriminant
    equal to +-(product of primes of S), i.e. an S-unit up to sign."""
    prim = normalize_primitive(f)
    disc = discriminant(prim)
    if disc == 0:
        return False, SIntegralityCertificate(False, 0, {}, "on boundary")
    d = int(disc)
    sign = 1 if d > 0 else -1
    d = abs(d)
    exponents = {}
    for p in S.primes:
        e = 0
        while d % p == 0:
            d //= p
            e += 1
        exponents[p] = e
    if d != 1:
        return False, SIntegralityCertificate(
            False, sign, exponents, f"discriminant has a prime factor outside S ({d} remains)"
        )
    return True, SIntegralityCertificate(True, sign, exponents)


def weighted_norm_identity_check(f: BinaryForm, S: PlaceSet) -> bool:
    """For primitive S-integral f, verify exactly that
    global_height(f,S)^{2n-2} = (sum binom^{-1} a_i^2)^{n-1}."""
    prim = normalize_primitive(f)
    if prim.coeffs != f.coeffs:
        raise NotSIntegralError("form must be primitive (integer, gcd 1, sign-normalized)")
    ok, cert = is_s_integral(f, S)
    if not ok:
        raise NotSIntegralError(f"form is not S-integral: {cert.reason}")
    return global_height(f, S).power_value == weighted_norm_power(f)
