"""Exact arithmetic for binary forms.

A binary form of degree n is f = a_0 x^n + a_1 x^{n-1} y + ... + a_n y^n
with rational coefficients, stored as the tuple (a_0, ..., a_n) of
`fractions.Fraction`.  SL2 acts on forms by (g . f)(x, y) = f(g^{-1}(x, y)).

The discriminant used throughout is the primitive integer polynomial of
degree 2n-2 in the coefficients, computed as the resultant of the two
partial derivatives divided by a per-degree constant.  The constant is
calibrated once per degree on the reference form x^n + y^n, whose
discriminant is (-1)^{n(n-1)/2} n^n (so -27 for the cubic).  Sign
convention: disc(x^3 + y^3) = -27.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Sequence

__all__ = [
    "BinaryForm",
    "GroupElement",
    "PAdicValuation",
    "INFINITY",
    "act",
    "discriminant",
    "valuation",
    "normalize_primitive",
    "is_prime",
    "rational_from_string",
    "rational_to_string",
]


class InvalidPlaceError(ValueError):
    """Raised when a place argument is neither a prime nor infinity."""


def is_prime(m: int) -> bool:
    """Deterministic Miller-Rabin, valid for all 64-bit integers and beyond
    (the base set certifies up to 3.3 * 10^24)."""
    if m < 2:
        return False
    for p in (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37):
        if m % p == 0:
            return m == p
    d = m - 1
    r = 0
    while d % 2 == 0:
        d //= 2
        r += 1
    for a in (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37):
        x = pow(a, d, m)
        if x in (1, m - 1):
            continue
        for _ in range(r - 1):
            x = x * x % m
            if x == m - 1:
                break
        else:
            return False
    return True


def rational_from_string(s: str) -> Fraction:
    """Parse "num/den", integer, or decimal strings into an exact Fraction."""
    return Fraction(s.strip())


def rational_to_string(x: Fraction) -> str:
    x = Fraction(x)
    return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


@dataclass(frozen=True)
class BinaryForm:
    """Degree-n binary form with exact rational coefficients a_0..a_n."""

    coeffs: tuple[Fraction, ...]

    def __post_init__(self):
        coeffs = tuple(Fraction(c) for c in self.coeffs)
        object.__setattr__(self, "coeffs", coeffs)
        if len(coeffs) < 4:
            raise ValueError("binary forms must have degree >= 3")
        if all(c == 0 for c in coeffs):
            raise ValueError("the zero form is not allowed")

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    @classmethod
    def of(cls, *coeffs) -> "BinaryForm":
        return cls(tuple(Fraction(c) for c in coeffs))

    def __call__(self, x: Fraction, y: Fraction) -> Fraction:
        n = self.degree
        x, y = Fraction(x), Fraction(y)
        return sum(c * x ** (n - i) * y**i for i, c in enumerate(self.coeffs))

    def scale(self, lam) -> "BinaryForm":
        lam = Fraction(lam)
        if lam == 0:
            raise ValueError("cannot scale a form by zero")
        return BinaryForm(tuple(lam * c for c in self.coeffs))

    def to_json(self) -> list[str]:
        return [rational_to_string(c) for c in self.coeffs]

    @classmethod
    def from_json(cls, data: Iterable[str]) -> "BinaryForm":
        return cls(tuple(rational_from_string(s) for s in data))


@dataclass(frozen=True)
class GroupElement:
    """2x2 rational matrix of determinant exactly 1."""

    a: Fraction
    b: Fraction
    c: Fraction
    d: Fraction

    def __post_init__(self):
        for name in "abcd":
            object.__setattr__(self, name, Fraction(getattr(self, name)))
        if self.a * self.d - self.b * self.c != 1:
            raise ValueError("matrix does not have determinant 1")

    @classmethod
    def of(cls, a, b, c, d) -> "GroupElement":
        return cls(Fraction(a), Fraction(b), Fraction(c), Fraction(d))

    @classmethod
    def identity(cls) -> "GroupElement":
        return cls.of(1, 0, 0, 1)

    def __matmul__(self, other: "GroupElement") -> "GroupElement":
        return GroupElement(
            self.a * other.a + self.b * other.c,
            self.a * other.b + self.b * other.d,
            self.c * other.a + self.d * other.c,
            self.c * other.b + self.d * other.d,
        )

    def inverse(self) -> "GroupElement":
        return GroupElement(self.d, -self.b, -self.c, self.a)

    def entries(self) -> tuple[Fraction, Fraction, Fraction, Fraction]:
        return (self.a, self.b, self.c, self.d)


def _convolve(p: Sequence[Fraction], q: Sequence[Fraction]) -> list[Fraction]:
    out = [Fraction(0)] * (len(p) + len(q) - 1)
    for i, pi in enumerate(p):
        if pi == 0:
            continue
        for j, qj in enumerate(q):
            if qj != 0:
                out[i + j] += pi * qj
    return out


def substitute_linear(coeffs: Sequence[Fraction], u: Sequence, v: Sequence) -> list[Fraction]:
    """Coefficients of sum_i a_i u(x,y)^{n-i} v(x,y)^i for linear forms
    u = u0 x + u1 y, v = v0 x + v1 y.  Exact; used by the group action."""
    n = len(coeffs) - 1
    u = [Fraction(u[0]), Fraction(u[1])]
    v = [Fraction(v[0]), Fraction(v[1])]
    # powers of u and v up to n, as homogeneous coefficient lists
    upow: list[list[Fraction]] = [[Fraction(1)]]
    vpow: list[list[Fraction]] = [[Fraction(1)]]
    for _ in range(n):
        upow.append(_convolve(upow[-1], u))
        vpow.append(_convolve(vpow[-1], v))
    out = [Fraction(0)] * (n + 1)
    for i, a in enumerate(coeffs):
        if a == 0:
            continue
        term = _convolve(upow[n - i], vpow[i])
        for j, t in enumerate(term):
            out[j] += a * t
    return out


def act(g: GroupElement, f: BinaryForm) -> BinaryForm:
    """(g . f)(x, y) = f(g^{-1}(x, y)); exact, degree preserving."""
    # g^{-1} = [[d, -b], [-c, a]] since det g = 1
    u = (g.d, -g.b)
    v = (-g.c, g.a)
    return BinaryForm(tuple(substitute_linear(f.coeffs, u, v)))


def substitute_linear_int(coeffs: Sequence[int], u: tuple[int, int], v: tuple[int, int]) -> list[int]:
    """Integer fast path of substitute_linear for integer forms and integer
    linear substitutions."""
    n = len(coeffs) - 1
    upow: list[list[int]] = [[1]]
    vpow: list[list[int]] = [[1]]
    for _ in range(n):
        prev = upow[-1]
        nxt = [0] * (len(prev) + 1)
        for i, c in enumerate(prev):
            nxt[i] += c * u[0]
            nxt[i + 1] += c * u[1]
        upow.append(nxt)
        prev = vpow[-1]
        nxt = [0] * (len(prev) + 1)
        for i, c in enumerate(prev):
            nxt[i] += c * v[0]
            nxt[i + 1] += c * v[1]
        vpow.append(nxt)
    out = [0] * (n + 1)
    for i, a in enumerate(coeffs):
        a = int(a)
        if a == 0:
            continue
        up = upow[n - i]
        vp = vpow[i]
        for k, x in enumerate(up):
            if x:
                for l, y in enumerate(vp):
                    if y:
                        out[k + l] += a * x * y
    return out


def act_int(coeffs: Sequence[int], a: int, b: int, c: int, d: int) -> list[int]:
    """Coefficients of act([[a,b],[c,d]], f) for integer forms and integer
    determinant-1 matrices, avoiding Fraction overhead."""
    return substitute_linear_int(coeffs, (d, -b), (-c, a))


def _det_fraction(rows: list[list[Fraction]]) -> Fraction:
    """Determinant by fraction Gaussian elimination with partial pivoting."""
    n = len(rows)
    det = Fraction(1)
    for col in range(n):
        piv = next((r for r in range(col, n) if rows[r][col] != 0), None)
        if piv is None:
            return Fraction(0)
        if piv != col:
            rows[col], rows[piv] = rows[piv], rows[col]
            det = -det
        pivval = rows[col][col]
        det *= pivval
        for r in range(col + 1, n):
            if rows[r][col] != 0:
                factor = rows[r][col] / pivval
                row = rows[r]
                prow = rows[col]
                for c in range(col, n):
                    row[c] -= factor * prow[c]
    return det


def _sylvester_resultant(p: Sequence[Fraction], q: Sequence[Fraction]) -> Fraction:
    m = len(p) - 1
    k = len(q) - 1
    size = m + k
    rows: list[list[Fraction]] = []
    for i in range(k):
        rows.append([Fraction(0)] * i + list(p) + [Fraction(0)] * (k - 1 - i))
    for i in range(m):
        rows.append([Fraction(0)] * i + list(q) + [Fraction(0)] * (m - 1 - i))
    return _det_fraction(rows)


def _raw_disc(coeffs: Sequence[Fraction]) -> Fraction:
    n = len(coeffs) - 1
    fx = [(n - i) * coeffs[i] for i in range(n)]
    fy = [(i + 1) * coeffs[i + 1] for i in range(n)]
    return _sylvester_resultant(fx, fy)


@lru_cache(maxsize=None)
def _disc_scale(n: int) -> Fraction:
    """Res(f_x, f_y) / disc(f), calibrated on x^n + y^n whose discriminant
    is (-1)^{n(n-1)/2} n^n.  Equals +-n^{n-2}."""
    ref = [Fraction(0)] * (n + 1)
    ref[0] = Fraction(1)
    ref[n] = Fraction(1)
    known = Fraction((-1) ** ((n * (n - 1)) // 2) * n**n)
    return _raw_disc(ref) / known


def discriminant(f: BinaryForm) -> Fraction:
    """Primitive integer discriminant of the form (integer-valued on integer
    forms, homogeneous of degree 2n-2, zero iff f has a repeated root)."""
    return _raw_disc(f.coeffs) / _disc_scale(f.degree)


@dataclass(frozen=True)
class PAdicValuation:
    """Exact p-adic valuation; value is None for the zero element (v = +oo)."""

    prime: int
    value: int | None

    @property
    def is_infinite(self) -> bool:
        return self.value is None

    def absolute_value(self) -> Fraction:
        """|x|_p = p^{-v}; 0 for the zero element."""
        if self.value is None:
            return Fraction(0)
        return Fraction(self.prime) ** (-self.value)


INFINITY = "oo"  # marker for the archimedean place


def _int_valuation(m: int, p: int) -> int:
    v = 0
    while m % p == 0:
        m //= p
        v += 1
    return v


def valuation(x, p: int) -> PAdicValuation:
    """Exact p-adic valuation of a rational; errors on non-prime p."""
    if not isinstance(p, int) or not is_prime(p):
        raise InvalidPlaceError(f"{p!r} is not a prime, hence not a finite place")
    x = Fraction(x)
    if x == 0:
        return PAdicValuation(p, None)
    return PAdicValuation(p, _int_valuation(x.numerator, p) - _int_valuation(x.denominator, p))


def normalize_primitive(f: BinaryForm) -> BinaryForm:
    """Scale f to integer coefficients with gcd 1 and first nonzero
    coefficient positive.  Idempotent."""
    den = math.lcm(*(c.denominator for c in f.coeffs))
    ints = [c.numerator * (den // c.denominator) for c in f.coeffs]
    g = math.gcd(*ints)
    ints = [c // g for c in ints]
    lead = next(c for c in ints if c != 0)
    if lead < 0:
        ints = [-c for c in ints]
    return BinaryForm(tuple(Fraction(c) for c in ints))


def primitive_key(f: BinaryForm) -> tuple[int, ...]:
    """Canonical integer tuple identifying the projective point [f]."""
    return tuple(int(c) for c in normalize_primitive(f).coeffs)
