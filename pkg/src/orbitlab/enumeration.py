"""Exact enumeration of SL2(Z_S) elements and orbit points in height balls.

For an S-integral point [f] and gamma in SL2(Z_S), the global height of
gamma.[f] equals the weighted coefficient norm of the primitive integer
representative (the discriminant parts over S cancel), so the counting
condition is a single exact integer inequality.  Counting is defined through
that norm for every base form with nonzero discriminant; when disc(f) has
prime factors outside S the norm differs from the product of local heights
by a constant factor, uniform over the orbit.

Elements are enumerated layer by layer: gamma = U (H/d) with d a positive
S-smooth denominator, H = [[alpha, beta], [0, delta]] a primitive Hermite
normal form of determinant d^2 (0 <= beta < delta), and U in SL2(Z).  The
decomposition is unique, so nothing is double counted.  Per layer, the
coefficients of the integer form f(delta x - beta y, alpha y) factor as
delta^{n-j} e_j(alpha, beta), which drives two rigorous prunes:

  * any counted image c has |disc c| <= n^{3(n-1)} (max_i binom * T^2)^{n-1},
    and |disc c| equals the layer discriminant, so layers whose scaled
    discriminant exceeds that cap are provably empty;
  * surviving layers get a certified archimedean Cartan cut bounding the
    entries of U.

Truncation status is three-valued: CERTIFIED (archimedean-only place sets,
where the Cartan sweep is a proof), SATURATED (finite places present; the
denominator scan stops after consecutive provably-empty levels, which is
empirical evidence rather than proof), TRUNCATED (a budget was exhausted;
counts are lower bounds).
"""

from __future__ import annotations

import heapq
import math
from bisect import bisect_right
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator, Sequence

import numpy as np

from .cartan import ArchimedeanCut, archimedean_cut
from .forms import BinaryForm, GroupElement, act_int, discriminant, normalize_primitive
from .heights import NotSIntegralError, PlaceSet

__all__ = [
    "HeightBallSpec",
    "CountSeries",
    "CountResult",
    "TruncationCertificate",
    "EnumerationBudget",
    "count_group_elements",
    "count_orbit_points",
    "count_series",
    "direct_point_enumeration",
    "certified_truncation",
    "enumerate_group",
]

CERTIFIED = "CERTIFIED"
SATURATED = "SATURATED"
TRUNCATED = "TRUNCATED"


@dataclass(frozen=True)
class HeightBallSpec:
    """Ball {g in SL2(Z_S) : H(g.[f]) <= T}, where H is evaluated as the
    weighted coefficient norm of the primitive integer representative of
    g.[f].  On S-integral points this equals the product of local heights
    over S exactly; for other base forms it differs from that product by the
    constant factor carried by the primes outside S in disc(f)."""

    form: BinaryForm
    places: PlaceSet
    threshold: Fraction

    def __post_init__(self):
        object.__setattr__(self, "threshold", Fraction(self.threshold))
        if self.threshold <= 0:
            raise ValueError("threshold must be positive")
        if discriminant(self.form) == 0:
            raise NotSIntegralError("base form has vanishing discriminant")


@dataclass(frozen=True)
class EnumerationBudget:
    max_levels: int = 400
    max_cosets: int = 500_000
    max_candidates_per_level: int = 120_000
    max_elements: int = 40_000_000
    beta_scan_cap: int = 4096
    lift_branch_cap: int = 50_000
    consecutive_empty_stop: int = 3


@dataclass(frozen=True)
class TruncationCertificate:
    """Search-region certificate for one enumeration run."""

    sigma_bound: float  # bound e^{t_cut/...}: top singular value of any admissible element
    rho: Fraction  # exact bound on the squared top singular value (base layer)
    padic_cuts: dict  # prime -> max denominator exponent examined with survivors
    status: str
    sweep_evidence: dict = field(default_factory=dict)

    @property
    def t_cut(self) -> float:
        return math.log(float(self.rho)) if self.rho > 0 else 0.0

    def to_json(self) -> dict:
        return {
            "sigma_bound": self.sigma_bound,
            "rho": str(self.rho),
            "padic_cuts": {str(p): m for p, m in sorted(self.padic_cuts.items())},
            "status": self.status,
            "sweep_evidence": self.sweep_evidence,
        }


@dataclass(frozen=True)
class CountSeries:
    thresholds: tuple
    group_counts: tuple
    point_counts: tuple
    statuses: tuple
    certificate: TruncationCertificate

    def __post_init__(self):
        ts = tuple(Fraction(t) for t in self.thresholds)
        object.__setattr__(self, "thresholds", ts)
        if any(t2 <= t1 for t1, t2 in zip(ts, ts[1:])):
            raise ValueError("thresholds must be strictly increasing")
        if any(c2 < c1 for c1, c2 in zip(self.group_counts, self.group_counts[1:])):
            raise ValueError("group counts must be nondecreasing")
        if any(p > g for p, g in zip(self.point_counts, self.group_counts)):
            raise ValueError("point counts cannot exceed group counts")


@dataclass(frozen=True)
class CountResult:
    threshold: Fraction
    group_count: int
    point_count: int
    status: str
    certificate: TruncationCertificate


# ---------------------------------------------------------------------------
# layer scan


@dataclass
class _Coset:
    d: int
    alpha: int
    beta: int
    delta: int
    form: tuple  # primitive integer coefficients of the layer form
    disc_abs: Fraction
    cut: ArchimedeanCut | None = None


def _binoms(n: int) -> list[int]:
    return [math.comb(n, i) for i in range(n + 1)]


def _lcm_binoms(n: int) -> int:
    return math.lcm(*_binoms(n))


def _disc_cap(n: int, T: Fraction) -> Fraction:
    """Rigorous bound on |disc c| over integer forms c with weighted norm <= T.
    |c_i| <= sqrt(binom(n,i)) T; for n = 3 the explicit discriminant gives
    |disc| <= (90 + 24 sqrt(3)) T^4 < 132 T^4, otherwise Hadamard's bound on
    the Sylvester matrix of the partials."""
    if n == 3:
        return Fraction(132) * T**4
    binom_max = math.comb(n, n // 2)
    return Fraction(n ** (3 * (n - 1))) * (binom_max * T * T) ** (n - 1)


def _iroot_floor(x: int, k: int) -> int:
    """floor(x^(1/k)) for nonnegative integers, Newton iteration on ints."""
    if x < 2:
        return x
    r = 1 << -(-x.bit_length() // k)
    while True:
        nr = ((k - 1) * r + x // r ** (k - 1)) // k
        if nr >= r:
            return r
        r = nr


def _int_root_ceil(num: int, den: int, k: int) -> int:
    """Smallest integer c >= 0 with c^k * den >= num."""
    if num <= 0:
        return 0
    c = _iroot_floor(-(-num // den), k)
    while c**k * den < num:
        c += 1
    while c > 0 and (c - 1) ** k * den >= num:
        c -= 1
    return c


def _xgcd(a: int, b: int) -> tuple[int, int, int]:
    old_r, r = a, b
    old_s, s = 1, 0
    old_t, t = 0, 1
    while r:
        q = old_r // r
        old_r, r = r, old_r - q * r
        old_s, s = s, old_s - q * s
        old_t, t = t, old_t - q * t
    return old_r, old_s, old_t


def _smooth_denominators(primes: Sequence[int], limit: int) -> Iterator[int]:
    """S-smooth positive integers in increasing order (at most `limit`)."""
    heap = [1]
    seen = {1}
    count = 0
    while heap and count < limit:
        d = heapq.heappop(heap)
        yield d
        count += 1
        for p in primes:
            nd = d * p
            if nd not in seen:
                seen.add(nd)
                heapq.heappush(heap, nd)


def _e_polys(coeffs: Sequence[int], alpha: int) -> list[list[int]]:
    """e_j(alpha, beta) = sum_{i<=j} a_i binom(n-i, j-i) (-beta)^{j-i} alpha^i
    as polynomials in beta: e_polys[j][k] is the coefficient of beta^k."""
    n = len(coeffs) - 1
    polys = []
    for j in range(n + 1):
        poly = [0] * (j + 1)
        for i in range(j + 1):
            a = int(coeffs[i])
            if a == 0:
                continue
            k = j - i
            poly[k] += a * math.comb(n - i, k) * (-1) ** k * alpha**i
        polys.append(poly)
    return polys


def _eval_poly(poly: Sequence[int], x: int) -> int:
    out = 0
    for c in reversed(poly):
        out = out * x + c
    return out


def _vp(m: int, p: int) -> int:
    v = 0
    while m % p == 0:
        m //= p
        v += 1
    return v


def _layer_form(coeffs: Sequence[int], d: int, alpha: int, beta: int, delta: int):
    """Primitive coefficients and content of f(delta x - beta y, alpha y)."""
    n = len(coeffs) - 1
    e = _e_polys(coeffs, alpha)
    F = [delta ** (n - j) * _eval_poly(e[j], beta) for j in range(n + 1)]
    content = math.gcd(*F)
    prim = [c // content for c in F]
    lead = next(c for c in prim if c != 0)
    if lead < 0:
        prim = [-c for c in prim]
    return tuple(prim), content


def _lift_residues(e_polys, p: int, needed: list[int], branch_cap: int):
    """Residues r mod p^t (t = max needed) such that every beta = r (mod p^t)
    satisfies v_p(e_j(beta)) >= needed[j] for all j.  Exact and complete."""
    t_star = max(needed)
    if t_star == 0:
        return [0], 1
    active = [0]
    mod = 1
    for t in range(t_star):
        nxt = []
        for r in active:
            for digit in range(p):
                r2 = r + digit * mod
                ok = True
                for j, poly in enumerate(e_polys):
                    if needed[j] == 0:
                        continue
                    val = _eval_poly(poly, r2)
                    if val == 0:
                        continue  # valuation +oo at this center; lifts stay >= t+1
                    v = _vp(val, p)
                    if v < t + 1 and v < needed[j]:
                        ok = False
                        break
                if ok:
                    nxt.append(r2)
        active = nxt
        mod *= p
        if len(active) > branch_cap:
            raise _BudgetExceeded("p-adic lifting branch cap")
        if not active:
            return [], mod
    return active, mod


class _BudgetExceeded(Exception):
    pass


def _requirement_vectors(content_min: int, primes: list[int], caps: dict) -> list[dict]:
    """Minimal exponent vectors k with prod p^{k_p} >= content_min, k_p <= cap;
    used to split a content requirement into per-prime lifting targets."""
    out = []

    def rec(idx: int, remaining: int, current: dict):
        if remaining <= 1:
            out.append(dict(current))
            return
        if idx == len(primes):
            return
        p = primes[idx]
        # option: satisfy the rest entirely with later primes
        rec(idx + 1, remaining, current)
        k = 0
        need = remaining
        while k < caps.get(p, 0):
            k += 1
            need = -(-need // p)  # ceil division by p
            current[p] = k
            rec(idx + 1, need, current)
            if need <= 1:
                break
        current.pop(p, None)

    rec(0, content_min, {})
    # drop dominated vectors
    minimal = []
    for v in out:
        if not any(w != v and all(w.get(p, 0) <= v.get(p, 0) for p in v) for w in out):
            if v not in minimal:
                minimal.append(v)
    return minimal


def _divisor_pairs(d: int, primes: list[int]) -> Iterator[tuple[int, int]]:
    """(alpha, delta) with alpha * delta = d^2, both S-smooth."""
    fact = {p: _vp(d, p) for p in primes if d % p == 0}
    items = sorted(fact.items())

    def rec(idx: int, alpha: int):
        if idx == len(items):
            yield alpha, d * d // alpha
            return
        p, m = items[idx]
        val = 1
        for _ in range(2 * m + 1):
            yield from rec(idx + 1, alpha * val)
            val *= p

    yield from rec(0, 1)


@dataclass
class _ScanResult:
    cosets: list
    padic_cuts: dict
    status: str
    evidence: dict


def _scan_layers(
    f: BinaryForm,
    S: PlaceSet,
    T: Fraction,
    budget: EnumerationBudget,
) -> _ScanResult:
    """Find every denominator layer that can contribute to the ball of radius
    T, with a certified archimedean cut per surviving coset."""
    n = f.degree
    coeffs = tuple(int(c) for c in normalize_primitive(f).coeffs)
    disc_f = abs(discriminant(BinaryForm(tuple(Fraction(c) for c in coeffs))))
    cap = _disc_cap(n, T)
    q_bound = T * T
    primes = list(S.primes)
    i0 = next(i for i, c in enumerate(coeffs) if c != 0)

    cosets: list[_Coset] = []
    padic_cuts = {p: 0 for p in primes}
    status = CERTIFIED if not primes else SATURATED
    evidence = {"levels": [], "disc_cap": str(cap)}
    truncated = False
    cosets_examined = 0
    empties = 0

    for d in _smooth_denominators(primes, budget.max_levels):
        level_survivors = 0
        level_candidates = 0
        dn = d**n
        # smallest content making the layer discriminant pass the cap:
        # disc_f * (d^n / content)^(2n-2) <= cap
        ratio = disc_f * Fraction(dn) ** (2 * n - 2) / cap
        content_min = _int_root_ceil(ratio.numerator, ratio.denominator, 2 * n - 2)
        try:
            for alpha, delta in _divisor_pairs(d, primes):
                # pair-level content ceiling from F_{i0} = a_{i0} alpha^{i0} delta^{n-i0}
                pair_cap = {
                    p: _vp(int(coeffs[i0]), p) + i0 * _vp(alpha, p) + (n - i0) * _vp(delta, p)
                    for p in primes
                }
                max_content = math.prod(p**v for p, v in pair_cap.items()) if primes else 1
                if d > 1 and max_content < content_min:
                    continue
                if delta <= budget.beta_scan_cap:
                    betas = range(delta)
                else:
                    e_pair = _e_polys(coeffs, alpha)
                    vectors = _requirement_vectors(content_min, primes, pair_cap)
                    base_set: set[int] = set()
                    for vec in vectors:
                        res_per_p = []
                        for p in primes:
                            vdp = _vp(delta, p)
                            kp = vec.get(p, 0)
                            needed = [max(0, kp - (n - j) * vdp) for j in range(n + 1)]
                            if max(needed) == 0:
                                res_per_p.append(([0], 1))
                                continue
                            res_per_p.append(
                                _lift_residues(e_pair, p, needed, budget.lift_branch_cap)
                            )
                        # CRT-combine residues across primes
                        combined = [(0, 1)]
                        for residues, m_p in res_per_p:
                            combined = [
                                (_crt(r1, m1, r2, m_p), m1 * m_p)
                                for r1, m1 in combined
                                for r2 in residues
                            ]
                        for r, m in combined:
                            step = m
                            b0 = r % step
                            count = (delta - b0 + step - 1) // step
                            if count > budget.max_candidates_per_level:
                                raise _BudgetExceeded("free residue expansion")
                            for s in range(count):
                                base_set.add(b0 + s * step)
                    betas = sorted(base_set)
                for beta in betas:
                    if math.gcd(alpha, math.gcd(beta, delta)) != 1:
                        continue
                    level_candidates += 1
                    cosets_examined += 1
                    if (
                        level_candidates > budget.max_candidates_per_level
                        or cosets_examined > budget.max_cosets
                    ):
                        raise _BudgetExceeded("coset budget")
                    prim, content = _layer_form(coeffs, d, alpha, beta, delta)
                    disc_layer = disc_f * Fraction(dn, content) ** (2 * n - 2)
                    if disc_layer > cap:
                        continue
                    cut = archimedean_cut(
                        BinaryForm(tuple(Fraction(c) for c in prim)), q_bound
                    )
                    if not cut.certified:
                        truncated = True
                    cosets.append(_Coset(d, alpha, beta, delta, prim, disc_layer, cut))
                    level_survivors += 1
        except _BudgetExceeded as exc:
            truncated = True
            evidence.setdefault("budget_events", []).append(f"d={d}: {exc}")
        evidence["levels"].append(
            {"d": d, "survivors": level_survivors, "candidates": level_candidates}
        )
        if level_survivors:
            for p in primes:
                padic_cuts[p] = max(padic_cuts[p], _vp(d, p))
            empties = 0
        else:
            empties += 1
            if d > 1 and empties >= budget.consecutive_empty_stop:
                break
    else:
        if primes:
            truncated = True  # ran out of level budget before saturating

    if truncated:
        status = TRUNCATED
    return _ScanResult(cosets, padic_cuts, status, evidence)


def _crt(r1: int, m1: int, r2: int, m2: int) -> int:
    if m1 == 1:
        return r2 % (m1 * m2) if m2 > 1 else 0
    g, x, _ = _xgcd(m1, m2)
    assert g == 1
    return (r1 + (r2 - r1) * x % m2 * m1) % (m1 * m2)


# ---------------------------------------------------------------------------
# SL2(Z) box enumeration


def _coprime_rows(B: int) -> Iterator[tuple[int, int, int, int, int, int]]:
    """(a, b, c0, d0, t_lo, t_hi): U = [[a, b], [c0 + t a, d0 + t b]] runs over
    all of SL2(Z) with |entries| <= B as (a, b) runs over coprime pairs and t
    over the stated interval."""
    for a in range(-B, B + 1):
        for b in range(-B, B + 1):
            if math.gcd(a, b) != 1:
                continue
            _, x, y = _xgcd(a, b)  # a x + b y = 1
            d0, c0 = x, -y  # a d0 - b c0 = 1
            t_lo, t_hi = -(10**18), 10**18
            for base, coef in ((c0, a), (d0, b)):
                if coef == 0:
                    if abs(base) > B:
                        t_lo, t_hi = 1, 0
                        break
                    continue
                lo = -(B + base)
                hi = B - base
                if coef > 0:
                    t_lo = max(t_lo, -(-lo // coef))
                    t_hi = min(t_hi, hi // coef)
                else:
                    t_lo = max(t_lo, -(-(-hi) // -coef))
                    t_hi = min(t_hi, -lo // -coef)
            if t_lo <= t_hi:
                yield a, b, c0, d0, t_lo, t_hi


def _box_matrices_numpy(B: int):
    """Vectorized SL2(Z) entries box; returns int64 arrays (A, Bb, C, D)."""
    rows = list(_coprime_rows(B))
    if not rows:
        return (np.zeros(0, dtype=np.int64),) * 4
    lens = np.array([t_hi - t_lo + 1 for *_, t_lo, t_hi in rows], dtype=np.int64)
    a = np.repeat(np.array([r[0] for r in rows], dtype=np.int64), lens)
    b = np.repeat(np.array([r[1] for r in rows], dtype=np.int64), lens)
    c0 = np.repeat(np.array([r[2] for r in rows], dtype=np.int64), lens)
    d0 = np.repeat(np.array([r[3] for r in rows], dtype=np.int64), lens)
    t0 = np.repeat(np.array([r[4] for r in rows], dtype=np.int64), lens)
    offsets = np.arange(lens.sum(), dtype=np.int64) - np.repeat(
        np.concatenate(([0], np.cumsum(lens)[:-1])), lens
    )
    t = t0 + offsets
    return a, b, c0 + t * a, d0 + t * b


def _image_coeffs_numpy(coeffs: Sequence[int], A, Bb, C, D) -> list:
    """Image coefficients act(U, f) for batched U; int64 exact (caller must
    pre-check the overflow bound)."""
    n = len(coeffs) - 1
    K = len(A)
    out = [np.zeros(K, dtype=np.int64) for _ in range(n + 1)]
    # u = D x - Bb y ; v = -C x + A y
    for i in range(n + 1):
        ai = int(coeffs[i])
        if ai == 0:
            continue
        for k in range(n - i + 1):
            cu = math.comb(n - i, k)
            for l in range(i + 1):
                cv = math.comb(i, l)
                term = (
                    D ** (n - i - k)
                    * (-Bb) ** k
                    * (-C) ** (i - l)
                    * A**l
                    * (ai * cu * cv)
                )
                out[k + l] += term
    return out


def _enumerate_coset_elements(
    coset: _Coset, n: int, thr_scaled: int, lcmb: int, budget: EnumerationBudget
) -> list[tuple[int, tuple]]:
    """All (scaled norm, image key) for U in the coset box passing the exact
    threshold; scaled norm = lcmb * W^2, an integer."""
    B = coset.cut.entry_bound
    coeffs = coset.form
    binoms = _binoms(n)
    weights = [lcmb // b for b in binoms]
    est = 10 * B * B + 20
    abs_sum = sum(abs(c) for c in coeffs)
    cmax = abs_sum * (2**n) * (B**n)
    norm_safe = (n + 1) * lcmb * cmax * cmax < 2**62  # norms fit in int64
    coeff_safe = cmax < 2**52  # coefficients exact in int64 and float64
    results: list[tuple[int, tuple]] = []
    if est > budget.max_elements:
        raise _BudgetExceeded("box enumeration size")
    if coeff_safe and est > 4000:
        A, Bb, C, D = _box_matrices_numpy(B)
        if len(A) > budget.max_elements:
            raise _BudgetExceeded("box enumeration size")
        cols = _image_coeffs_numpy(coeffs, A, Bb, C, D)
        if norm_safe:
            w = np.zeros(len(A), dtype=np.int64)
            for wt, col in zip(weights, cols):
                w += wt * col * col
            idx = np.nonzero(w <= thr_scaled)[0]
            surv = np.stack([col[idx] for col in cols], axis=1).tolist()
            wlist = w[idx].tolist()
            for row, wv in zip(surv, wlist):
                results.append((int(wv), _sign_canon(tuple(row))))
        else:
            # float prefilter (coefficients are float-exact; the summed norm
            # has relative error < 1e-12), exact big-int check on survivors
            wf = np.zeros(len(A), dtype=np.float64)
            for wt, col in zip(weights, cols):
                colf = col.astype(np.float64)
                wf += wt * colf * colf
            idx = np.nonzero(wf <= float(thr_scaled) * (1.0 + 1e-9))[0]
            surv = np.stack([col[idx] for col in cols], axis=1).tolist()
            for row in surv:
                w = sum(wt * int(x) * int(x) for wt, x in zip(weights, row))
                if w <= thr_scaled:
                    results.append((w, _sign_canon(tuple(int(x) for x in row))))
    else:
        for a, b, c0, d0, t_lo, t_hi in _coprime_rows(B):
            for t in range(t_lo, t_hi + 1):
                c, d = c0 + t * a, d0 + t * b
                img = act_int(coeffs, a, b, c, d)
                w = sum(wt * x * x for wt, x in zip(weights, img))
                if w <= thr_scaled:
                    results.append((w, _sign_canon(tuple(img))))
    return results


def _sign_canon(key: tuple) -> tuple:
    for c in key:
        if c != 0:
            return key if c > 0 else tuple(-x for x in key)
    return key


# ---------------------------------------------------------------------------
# public operations


def count_series(
    form: BinaryForm,
    places: PlaceSet,
    thresholds: Sequence,
    budget: EnumerationBudget | None = None,
) -> CountSeries:
    """Exact N(f, T) and distinct-point counts along an increasing T grid,
    enumerated once at the largest threshold."""
    budget = budget or EnumerationBudget()
    ts = [Fraction(t) for t in thresholds]
    if any(t2 <= t1 for t1, t2 in zip(ts, ts[1:])) or not ts:
        raise ValueError("thresholds must be a nonempty strictly increasing list")
    spec = HeightBallSpec(form, places, ts[-1])  # validates disc != 0
    f = normalize_primitive(spec.form)
    n = f.degree
    lcmb = _lcm_binoms(n)
    T_max = ts[-1]

    scan = _scan_layers(f, places, T_max, budget)
    thr_scaled = int(lcmb * T_max * T_max)  # floor; exact for integer norms
    elements: list[tuple[int, tuple]] = []
    status = scan.status
    for coset in scan.cosets:
        try:
            elements.extend(
                _enumerate_coset_elements(coset, n, thr_scaled, lcmb, budget)
            )
        except _BudgetExceeded:
            status = TRUNCATED
    elements.sort(key=lambda e: e[0])
    norms = [e[0] for e in elements]

    group_counts = []
    point_counts = []
    seen: set = set()
    pos = 0
    for T in ts:
        thr = int(lcmb * T * T)
        cnt = bisect_right(norms, thr)
        while pos < cnt:
            seen.add(elements[pos][1])
            pos += 1
        group_counts.append(cnt)
        point_counts.append(len(seen))

    base_cut = next((c.cut for c in scan.cosets if c.d == 1), None)
    rho = base_cut.rho if base_cut else Fraction(1)
    cert = TruncationCertificate(
        sigma_bound=float(rho) ** 0.5,
        rho=rho,
        padic_cuts=scan.padic_cuts,
        status=status,
        sweep_evidence=scan.evidence,
    )
    return CountSeries(
        thresholds=tuple(ts),
        group_counts=tuple(group_counts),
        point_counts=tuple(point_counts),
        statuses=tuple(status for _ in ts),
        certificate=cert,
    )


def count_group_elements(
    spec: HeightBallSpec, budget: EnumerationBudget | None = None
) -> tuple[CountResult, TruncationCertificate]:
    series = count_series(spec.form, spec.places, [spec.threshold], budget)
    res = CountResult(
        threshold=spec.threshold,
        group_count=series.group_counts[0],
        point_count=series.point_counts[0],
        status=series.statuses[0],
        certificate=series.certificate,
    )
    return res, series.certificate


def count_orbit_points(
    spec: HeightBallSpec, budget: EnumerationBudget | None = None
) -> CountResult:
    res, _ = count_group_elements(spec, budget)
    return res


def certified_truncation(
    spec: HeightBallSpec, budget: EnumerationBudget | None = None
) -> TruncationCertificate:
    """Truncation certificate for the ball, without running the enumeration."""
    budget = budget or EnumerationBudget()
    f = normalize_primitive(spec.form)
    scan = _scan_layers(f, spec.places, Fraction(spec.threshold), budget)
    base_cut = next((c.cut for c in scan.cosets if c.d == 1), None)
    if base_cut is None:
        base_cut = archimedean_cut(f, Fraction(spec.threshold) ** 2)
    return TruncationCertificate(
        sigma_bound=float(base_cut.rho) ** 0.5,
        rho=base_cut.rho,
        padic_cuts=scan.padic_cuts,
        status=scan.status if base_cut.certified else TRUNCATED,
        sweep_evidence=scan.evidence,
    )


def iter_group_elements(
    places: PlaceSet, entry_bound: int, denominator_exponents: dict
) -> Iterator[GroupElement]:
    """Every g = U H / d in SL2(Z_S) with v_p(d) <= denominator_exponents[p],
    H a primitive Hermite normal form of determinant d^2 and U in SL2(Z) with
    |entries| <= entry_bound; each element exactly once."""
    primes = list(places.primes)
    exps = [range(denominator_exponents.get(p, 0) + 1) for p in primes]

    def denominators():
        def rec(idx, d):
            if idx == len(primes):
                yield d
                return
            for k in exps[idx]:
                yield from rec(idx + 1, d * primes[idx] ** k)

        yield from sorted(rec(0, 1))

    for d in denominators():
        for alpha, delta in _divisor_pairs(d, primes):
            for beta in range(delta):
                if math.gcd(alpha, math.gcd(beta, delta)) != 1:
                    continue
                for a, b, c0, d0, t_lo, t_hi in _coprime_rows(entry_bound):
                    for t in range(t_lo, t_hi + 1):
                        c, dd = c0 + t * a, d0 + t * b
                        yield GroupElement(
                            Fraction(a * alpha, d),
                            Fraction(a * beta + b * delta, d),
                            Fraction(c * alpha, d),
                            Fraction(c * beta + dd * delta, d),
                        )


def enumerate_group(places: PlaceSet, cert: TruncationCertificate) -> Iterator[GroupElement]:
    """Every g in SL2(Z_S) respecting the certificate cuts, exactly once:
    g = U H / d with d = prod p^{k_p} (k_p <= cut), H a primitive Hermite
    normal form of determinant d^2, U in SL2(Z) with entries bounded by the
    archimedean cut."""
    B = max(1, math.isqrt(int(cert.rho)) + 1)
    yield from iter_group_elements(places, B, cert.padic_cuts)


# ---------------------------------------------------------------------------
# direct point enumeration (degree-3 cross-validation oracle)


def direct_point_enumeration(n: int, places: PlaceSet, T) -> list[BinaryForm]:
    """All primitive cubic forms with weighted norm <= T and nonzero
    S-smooth discriminant, by exhaustive box sweep.  Only n = 3 is supported;
    the box is small enough there for a complete scan."""
    if n != 3:
        raise ValueError("direct point enumeration supports n = 3 only")
    T = Fraction(T)
    thr = int(3 * T * T)  # scaled norm 3a0^2 + a1^2 + a2^2 + 3a3^2 <= 3T^2
    A0 = math.isqrt(thr // 3)
    A1 = math.isqrt(thr)
    out = []
    a2g, a3g = np.meshgrid(
        np.arange(-A1, A1 + 1, dtype=np.int64),
        np.arange(-A0, A0 + 1, dtype=np.int64),
        indexing="ij",
    )
    a2f = a2g.ravel()
    a3f = a3g.ravel()
    base = a2f * a2f + 3 * a3f * a3f
    for a0 in range(0, A0 + 1):
        for a1 in range(-A1, A1 + 1):
            head = 3 * a0 * a0 + a1 * a1
            if head > thr:
                continue
            mask = base <= thr - head
            a2 = a2f[mask]
            a3 = a3f[mask]
            disc = (
                18 * a0 * a1 * a2 * a3
                - 4 * a1**3 * a3
                + (a1 * a2) ** 2
                - 4 * a0 * a2**3
                - 27 * (a0 * a3) ** 2
            )
            ok = disc != 0
            rem = np.abs(disc)
            for p in places.primes:
                while True:
                    div = ok & (rem % p == 0)
                    if not div.any():
                        break
                    rem[div] //= p
            ok &= rem == 1
            # primitive and sign-canonical (first nonzero coefficient positive)
            g = np.gcd(np.gcd(a0, np.abs(a1)), np.gcd(np.abs(a2), np.abs(a3)))
            ok &= g == 1
            if a0 == 0:
                if a1 > 0:
                    pass
                elif a1 < 0:
                    ok &= False
                else:
                    ok &= (a2 > 0) | ((a2 == 0) & (a3 > 0))
            for i in np.nonzero(ok)[0]:
                out.append(BinaryForm.of(a0, a1, int(a2[i]), int(a3[i])))
    out.sort(key=lambda f: tuple(int(c) for c in f.coeffs))
    return out
