"""Archimedean truncation certificates via Cartan coordinates.

Write g = k a_t k' with rotations k, k' and a_t = diag(e^{t/2}, e^{-t/2}).
The weighted coefficient norm W(c)^2 = sum_i binom(n,i)^{-1} c_i^2 is
rotation invariant, so for a fixed form b,

    W(act(g, b))^2 = Q(rho, theta) := sum_i binom(n,i)^{-1} b_theta_i^2 rho^{2i-n}

depends only on rho = e^t (the squared top singular value of g) and on the
rotation angle theta of k'.  For fixed theta, Q is a positive combination
of exponentials in t, hence convex in t and eventually increasing; once
Q(rho2, theta) exceeds both a threshold R and Q(rho1, theta) for some
rho1 < rho2, convexity forces Q(rho, theta) > R for every rho >= rho2.

The certificate produced here verifies that condition in exact rational
arithmetic on a grid of rational rotations k(u) (u = tan(theta/2)), with an
exact Lipschitz bound in theta covering the gaps.  Every matrix entry of an
admissible group element is bounded by its top singular value, so the cut
rho2 yields a finite integer search box.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .forms import BinaryForm

__all__ = ["ArchimedeanCut", "archimedean_cut", "rotated_coeffs_float", "weighted_q_float"]


@dataclass(frozen=True)
class ArchimedeanCut:
    """Certified bound: any g in SL2(R) with W(act(g, b))^2 <= q_bound has
    squared top singular value < rho; entries of integer candidates are
    bounded by entry_bound."""

    rho: Fraction
    rho_low: Fraction
    entry_bound: int
    grid_size: int
    certified: bool

    @property
    def t_cut(self) -> float:
        return math.log(float(self.rho))


def _sqrt_up(m: int, bits: int = 24) -> Fraction:
    """Rational upper bound for sqrt(m)."""
    if m == 0:
        return Fraction(0)
    scale = 1 << bits
    return Fraction(math.isqrt(m * scale * scale) + 1, scale)


def _binoms(n: int) -> list[int]:
    return [math.comb(n, i) for i in range(n + 1)]


def rotated_integer_form(coeffs: tuple, p: int, q: int) -> list[int]:
    """(p^2+q^2)^n times the coefficients of act(k(u), b) for u = p/q, where
    k(u) is the rational rotation with cos = (q^2-p^2)/(q^2+p^2),
    sin = 2pq/(q^2+p^2).  Integer output for integer input forms."""
    from .forms import substitute_linear_int

    cterm = q * q - p * p
    sterm = 2 * p * q
    # act substitutes (x, y) -> (d x - b y, -c x + a y) for k = [[a,b],[c,d]];
    # here a = d = cterm, b = -sterm, c = sterm (all scaled by p^2+q^2).
    return substitute_linear_int([int(c) for c in coeffs], (cterm, sterm), (-sterm, cterm))


def _q_exact(scaled: list[int], scale_pow: int, rho: Fraction, binoms: list[int]) -> Fraction:
    """Q(rho, u) from a rotated integer form scaled by (p^2+q^2)^n."""
    n = len(scaled) - 1
    total = Fraction(0)
    for i, c in enumerate(scaled):
        if c:
            total += Fraction(c * c, binoms[i]) * rho ** (2 * i - n)
    return total / scale_pow


def _sqrt_up_frac(x: Fraction) -> Fraction:
    """Rational upper bound for sqrt of a nonnegative rational."""
    if x == 0:
        return Fraction(0)
    return Fraction(math.isqrt(x.numerator * x.denominator) + 1, x.denominator)


def _coeff_drift_bounds(n: int, w_up: Fraction, h: Fraction, binoms: list[int]) -> list[Fraction]:
    """eps_i >= |b_theta_i - b_theta0_i| for |theta - theta0| <= h, from the
    rotation generator (d b_theta / d theta)_i = (n-i+1) b_{i-1} - (i+1) b_{i+1}
    and the rotation-invariant coefficient bounds |b_j| <= sqrt(binom_j) W."""
    eps = []
    for i in range(n + 1):
        li = Fraction(0)
        if i >= 1:
            li += (n - i + 1) * _sqrt_up(binoms[i - 1])
        if i + 1 <= n:
            li += (i + 1) * _sqrt_up(binoms[i + 1])
        eps.append(h * w_up * li)
    return eps


def rotated_coeffs_float(coeffs: np.ndarray, cos_t: np.ndarray, sin_t: np.ndarray) -> np.ndarray:
    """Float coefficients of act(k_theta, b) for arrays of angles; shape
    (len(theta), n+1)."""
    n = len(coeffs) - 1
    K = len(cos_t)
    out = np.zeros((K, n + 1))
    # act: (x,y) -> (d x - b y, -c x + a y) with (a,b,c,d) = (cos,-sin,sin,cos)
    # u = cos x + sin y ; v = -sin x + cos y
    for i in range(n + 1):
        a = float(coeffs[i])
        if a == 0.0:
            continue
        for k in range(n - i + 1):
            cu = math.comb(n - i, k)
            for l in range(i + 1):
                cv = math.comb(i, l)
                j = k + l
                # u^{n-i}: term C(n-i,k) cos^{n-i-k} sin^k x^{n-i-k} y^k
                # v^{i}:   term C(i,l) (-sin)^{i-l} cos^l x^{i-l} y^l
                out[:, j] += (
                    a
                    * cu
                    * cv
                    * cos_t ** (n - i - k)
                    * sin_t**k
                    * (-sin_t) ** (i - l)
                    * cos_t**l
                )
    return out


def weighted_q_float(rot: np.ndarray, rho, n: int) -> np.ndarray:
    """Q(rho, theta) for rotated coefficient rows; rho scalar or array
    broadcastable against rot's first axis."""
    binoms = np.array([math.comb(n, i) for i in range(n + 1)], dtype=float)
    powers = np.array([2 * i - n for i in range(n + 1)], dtype=float)
    rho = np.asarray(rho, dtype=float)
    return np.sum(rot**2 / binoms * rho[..., None] ** powers, axis=-1)


def _float_rho_ladder(coeffs, n: int, q_bound: float, target_factor: float = 4.0) -> float:
    """Smallest ladder rho with min_theta Q(rho, theta) >= target_factor *
    q_bound (heuristic guess; the exact pass validates)."""
    K = 1024
    thetas = np.linspace(-0.5 * math.pi, math.pi, K)
    rot = rotated_coeffs_float(np.array([float(c) for c in coeffs]), np.cos(thetas), np.sin(thetas))
    rho = 1.0
    for _ in range(4000):
        q = weighted_q_float(rot, np.full(K, rho), n)
        if q.min() > target_factor * max(q_bound, 1e-300):
            return rho
        rho *= 1.25
    return rho


def archimedean_cut(
    b: BinaryForm,
    q_bound: Fraction,
    *,
    grid_size: int = 96,
    max_retries: int = 14,
) -> ArchimedeanCut:
    """Certified archimedean truncation for the ball {W(act(g,b))^2 <= q_bound}.

    Exact-rational verification on a u-grid of rational rotations; theta gaps
    are covered by the exact Lipschitz bound.  Falls back to certified=False
    only if the retry budget is exhausted (callers must then report
    truncation rather than a certified count).
    """
    from .heights import weighted_norm_square

    n = b.degree
    binoms = _binoms(n)
    w2 = weighted_norm_square(b)
    q_bound = Fraction(q_bound)

    # the quarter-turn companion covers theta in [pi/2, 3pi/2) via u in [-1,1]
    rot90 = tuple(_rot90_coeffs(b.coeffs))
    variants = [tuple(int(c) for c in b.coeffs), tuple(int(c) for c in rot90)]

    rho2_f = _float_rho_ladder(b.coeffs, n, float(q_bound))
    N = grid_size
    rho2 = _dyadic_at_least(rho2_f)
    w_up = _sqrt_up_frac(w2)
    for attempt in range(max_retries):
        rho1 = rho2 * Fraction(3, 4)
        # interval enclosure of the rotated coefficients over each grid cell
        eps = _coeff_drift_bounds(n, w_up, Fraction(1, N), binoms)
        grow = [rho2 ** (2 * i - n) - rho1 ** (2 * i - n) for i in range(n + 1)]
        ok = True
        need_radius = False
        for coeffs in variants:
            for j in range(-N, N + 1):
                scaled = rotated_integer_form(coeffs, j, N)
                cell = j * j + N * N
                lo2 = []  # lower bounds for b_theta_i^2 over the cell
                hi2 = []  # upper bounds
                for i, c in enumerate(scaled):
                    bsq = Fraction(c * c, cell**n)  # b_i^2 at the grid point, exact
                    lo = _sqrt_down_frac(bsq) - eps[i]
                    lo = lo if lo > 0 else Fraction(0)
                    lo2.append(lo * lo)
                    hi = _sqrt_up_frac(bsq) + eps[i]
                    hi2.append(hi * hi)
                q2_low = sum(
                    Fraction(1, binoms[i]) * lo2[i] * rho2 ** (2 * i - n) for i in range(n + 1)
                )
                if q2_low <= q_bound:
                    ok = False
                    raw = _q_exact(scaled, cell**n, rho2, binoms)
                    need_radius = raw <= q_bound * 2
                    break
                incr = Fraction(0)
                for i in range(n + 1):
                    if 2 * i > n:
                        incr += Fraction(1, binoms[i]) * lo2[i] * grow[i]
                    elif 2 * i < n:
                        incr -= Fraction(1, binoms[i]) * hi2[i] * (-grow[i])
                if incr <= 0:
                    ok = False
                    need_radius = True
                    break
            if not ok:
                break
        if ok:
            return ArchimedeanCut(rho2, rho1, _entry_bound(rho2), N, True)
        if need_radius:
            rho2 = rho2 * 2
        else:
            N = min(2 * N, 8192)
            if N == 8192 and attempt > 6:
                rho2 = rho2 * 2
    return ArchimedeanCut(rho2, rho2 * Fraction(3, 4), _entry_bound(rho2), N, False)


def _sqrt_down_frac(x: Fraction) -> Fraction:
    """Rational lower bound for sqrt of a nonnegative rational."""
    if x == 0:
        return Fraction(0)
    return Fraction(math.isqrt(x.numerator * x.denominator), x.denominator)


def _rot90_coeffs(coeffs) -> list[Fraction]:
    """Coefficients of act(k_{pi/2}, b): substitution (x, y) -> (-y, x)...
    computed exactly via (x,y) -> (d x - b y, -c x + a y) with k = [[0,-1],[1,0]]."""
    n = len(coeffs) - 1
    # k = [[0,-1],[1,0]]: a=0,b=-1,c=1,d=0 -> u = (0, 1), v = (-1, 0)
    # sum a_i u^{n-i} v^i = sum a_i y^{n-i} (-x)^i
    out = [Fraction(0)] * (n + 1)
    for i, a in enumerate(coeffs):
        out[n - i] = a * (-1) ** i
    return out


def _dyadic_at_least(x: float) -> Fraction:
    """Small-denominator rational >= max(x, 9/8)."""
    x = max(x, 1.125)
    return Fraction(math.ceil(x * 64), 64)


def _entry_bound(rho: Fraction) -> int:
    """Integer B >= sqrt(rho); entries of any admissible unimodular factor
    are bounded by the top singular value sqrt(rho)."""
    c = rho.numerator // rho.denominator + 1
    B = math.isqrt(c)
    if B * B < c:
        B += 1
    return max(B, 1)
