"""Monte Carlo estimation of Haar volumes of height balls.

Measure conventions (the asymptotic statements tested downstream are
invariant under them):

  * real place: Cartan coordinates g = k a_t k' with a_t = diag(e^{t/2},
    e^{-t/2}); Haar = sinh(t) dt with both rotation factors normalized to
    mass 1, so the region {t <= t0} has mass cosh(t0) - 1;
  * finite place p: mass(SL2(Z_p)) = 1.  The shell of elements with Cartan
    level m splits into (p+1) p^{2m-1} disjoint cells K a_m k' (one per
    coset of the level-p^{2m} upper-congruence subgroup), each of exact
    mass 1.

Local heights are evaluated through the left-invariance of the height under
the compact factors: only (t, theta) matters at the real place and only the
cell matters at a finite place, where the height is an exact power of p
computed from coefficient valuations at finite precision with ultrametric
stability rechecks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .cartan import archimedean_cut, rotated_coeffs_float, weighted_q_float
from .enumeration import _e_polys, _lift_residues, _vp
from .forms import BinaryForm, discriminant, normalize_primitive
from .heights import PlaceSet

__all__ = [
    "HaarSampler",
    "VolumeSeries",
    "ArchimedeanSample",
    "PadicCellSample",
    "sample_archimedean",
    "sample_padic",
    "shell_mass",
    "shell_cell_count",
    "truncation_mass",
    "estimate_volume",
    "well_roundedness_diagnostic",
    "ratio_convergence",
]


@dataclass(frozen=True)
class HaarSampler:
    place: object  # prime or "oo"
    seed: int
    normalization: str = "mass(K)=1; archimedean radial density sinh(t)"

    def rng(self) -> np.random.Generator:
        return np.random.default_rng(self.seed)


@dataclass(frozen=True)
class ArchimedeanSample:
    t: float
    theta_left: float
    theta_right: float
    weight: float  # total mass of the truncated region

    def matrix(self) -> np.ndarray:
        def rot(th):
            return np.array([[math.cos(th), -math.sin(th)], [math.sin(th), math.cos(th)]])

        a = np.diag([math.exp(self.t / 2), math.exp(-self.t / 2)])
        return rot(self.theta_left) @ a @ rot(self.theta_right)


@dataclass(frozen=True)
class PadicCellSample:
    prime: int
    level: int  # Cartan level m
    rep: tuple  # entries of k' modulo the stated modulus
    modulus: int
    weight: Fraction  # exact Haar mass of the cell (always 1 under mass(K)=1)


def shell_cell_count(p: int, m: int) -> int:
    """Number of disjoint cells K a_m k' in the level-m Cartan shell."""
    return 1 if m == 0 else (p + 1) * p ** (2 * m - 1)


def shell_mass(p: int, m: int) -> Fraction:
    """Exact Haar mass of the level-m shell under mass(SL2(Z_p)) = 1."""
    return Fraction(shell_cell_count(p, m))


def truncation_mass(p: int, m_max: int) -> Fraction:
    return sum((shell_mass(p, m) for m in range(m_max + 1)), Fraction(0))


def sample_archimedean(sampler: HaarSampler, t_max: float, count: int = 1):
    """Weighted samples from {k a_t k' : 0 <= t <= t_max}; t follows the
    sinh density, the weight is the region's total mass cosh(t_max) - 1, so
    weighted indicator means estimate Haar masses."""
    if t_max <= 0:
        raise ValueError("t_max must be positive")
    rng = sampler.rng()
    mass = math.cosh(t_max) - 1.0
    u = rng.random(count)
    t = np.arccosh(1.0 + u * mass)
    th1 = rng.random(count) * 2 * math.pi
    th2 = rng.random(count) * 2 * math.pi
    return [
        ArchimedeanSample(float(t[i]), float(th1[i]), float(th2[i]), mass)
        for i in range(count)
    ]


def _inv_mod_q_batch(a: np.ndarray, p: int, q: int) -> np.ndarray:
    """Inverse of units modulo q = p^j by Hensel lifting from mod p."""
    a = a % q
    if p == 2:
        x = np.ones_like(a)
    else:
        x = np.array([pow(int(v), p - 2, p) for v in (a % p)], dtype=a.dtype)
    mod = p
    while mod < q:
        mod = min(mod * mod, q)
        x = (x * (2 - a % mod * x % mod)) % mod
    return x % q


def _uniform_row_params(rng: np.random.Generator, p: int, q: int, count: int):
    """Uniform (a, b, t) with (a, b) a primitive row mod q = p^j and t mod q;
    the map (a, b, t) -> [[a, b], [c0 + t a, d0 + t b]] is a bijection onto
    SL2(Z/q), so uniform parameters give uniform matrices.  Extending a, b, t
    with fresh higher digits refines the same matrix mod q (same cell)."""
    a = np.zeros(count, dtype=np.int64)
    b = np.zeros(count, dtype=np.int64)
    todo = np.ones(count, dtype=bool)
    while todo.any():
        k = int(todo.sum())
        a[todo] = rng.integers(0, q, k)
        b[todo] = rng.integers(0, q, k)
        todo &= (a % p == 0) & (b % p == 0)
    t = rng.integers(0, q, count)
    return a, b, t


def _complete_row_int64(a, b, t, p: int, q: int):
    """(a, b, c, d) over SL2(Z/q) from row parameters, int64 arithmetic."""
    a_unit = a % p != 0
    c0 = np.zeros(len(a), dtype=np.int64)
    d0 = np.zeros(len(a), dtype=np.int64)
    if a_unit.any():
        d0[a_unit] = _inv_mod_q_batch(a[a_unit] % q, p, q)
    if (~a_unit).any():
        c0[~a_unit] = (-_inv_mod_q_batch(b[~a_unit] % q, p, q)) % q
    c = (c0 + t % q * (a % q)) % q
    d = (d0 + t % q * (b % q)) % q
    return a % q, b % q, c, d


def _uniform_sl2_mod(rng: np.random.Generator, p: int, q: int, count: int):
    """Uniform matrices over SL2(Z/q), q = p^j, as int64 arrays (a, b, c, d)."""
    a, b, t = _uniform_row_params(rng, p, q, count)
    return _complete_row_int64(a, b, t, p, q)


def sample_padic(sampler: HaarSampler, m_max: int, count: int = 1, precision_extra: int = 4):
    """Cells K a_m k' drawn uniformly by Haar mass from the truncation
    m <= m_max; each cell has exact mass 1 under mass(K) = 1."""
    if m_max < 0:
        raise ValueError("m_max must be nonnegative")
    p = int(sampler.place)
    rng = sampler.rng()
    counts = np.array([shell_cell_count(p, m) for m in range(m_max + 1)], dtype=float)
    probs = counts / counts.sum()
    ms = rng.choice(np.arange(m_max + 1), size=count, p=probs)
    out = []
    for m in ms:
        j = max(2 * int(m), 1) + precision_extra
        q = p**j
        a, b, c, d = _uniform_sl2_mod(rng, p, min(q, 2**28), 1)
        out.append(
            PadicCellSample(p, int(m), (int(a[0]), int(b[0]), int(c[0]), int(d[0])), min(q, 2**28), Fraction(1))
        )
    return out


# ---------------------------------------------------------------------------
# exact p-adic height exponents on cells


def _substitute_batch_mod(coeffs, u0, u1, v0, v1, q: int):
    """Coefficients of f(u0 x + u1 y, v0 x + v1 y) modulo q, batched."""
    n = len(coeffs) - 1
    K = len(u0)
    out = [np.zeros(K, dtype=np.int64) for _ in range(n + 1)]
    for i in range(n + 1):
        ai = int(coeffs[i]) % q
        if ai == 0:
            continue
        for k in range(n - i + 1):
            cu = math.comb(n - i, k)
            for l in range(i + 1):
                cv = math.comb(i, l)
                term = np.full(K, (ai * cu % q) * cv % q, dtype=np.int64)
                for _ in range(n - i - k):
                    term = term * u0 % q
                for _ in range(k):
                    term = term * u1 % q
                for _ in range(i - l):
                    term = term * v0 % q
                for _ in range(l):
                    term = term * v1 % q
                out[k + l] = (out[k + l] + term) % q
    return out


def _min_valuation_batch(cols, p: int, j: int):
    """(min_i v_p(c_i), certain) per sample; valuations above j-1 are
    uncertain at this precision."""
    K = len(cols[0])
    minv = np.full(K, j, dtype=np.int64)
    for col in cols:
        v = np.zeros(K, dtype=np.int64)
        rem = col.copy()
        alive = rem != 0
        while alive.any():
            div = alive & (rem % p == 0)
            if not div.any():
                break
            rem[div] //= p
            v[div] += 1
            alive = div
        v[col == 0] = j  # unknown beyond precision
        minv = np.minimum(minv, v)
    certain = minv < j
    return minv, certain


def _complete_row_exact(a: int, b: int, t: int, p: int, q: int):
    """(a, b, c, d) in SL2(Z/q) from row parameters, exact python ints."""
    if a % p != 0:
        d0 = pow(a % q, -1, q)
        c0 = 0
    else:
        c0 = (-pow(b % q, -1, q)) % q
        d0 = 0
    return a % q, b % q, (c0 + t * a) % q, (d0 + t * b) % q


def _padic_exponents(coeffs, p, m, vdisc, n, rng, count):
    """Exponent E with H_p(cell)^{2n-2} = p^E for `count` uniform cells at
    level m.  Each cell is identified by row parameters (a, b, t); when the
    precision does not pin the coefficient valuations down, the parameters
    are extended with fresh uniform digits (refining the same cell) and the
    valuations recomputed, until stable."""
    j = max(2 * m + vdisc + 6, 4)
    while p**j > 2**28 and j > 2 * m + 2:
        j -= 1
    q = p**j
    a, b, t = _uniform_row_params(rng, p, q, count)
    aa, bb, cc, dd = _complete_row_int64(a, b, t, p, q)
    pm = pow(p, 2 * m, q)
    u0, u1 = dd * pm % q, (-bb) % q
    v0, v1 = (-cc) * pm % q, aa % q
    cols = _substitute_batch_mod(coeffs, u0, u1, v0, v1, q)
    minv, certain = _min_valuation_batch(cols, p, j)
    exps = vdisc + 2 * m * n * (n - 1) - (2 * n - 2) * minv
    pending = np.nonzero(~certain)[0]
    from .forms import substitute_linear_int

    for idx in pending:
        ai, bi, ti = int(a[idx]), int(b[idx]), int(t[idx])
        j_cur = j
        while True:
            # extend the cell representative with fresh uniform digits
            jj = j_cur + 6
            qq = p**jj
            step = p**j_cur
            span = p ** (jj - j_cur)
            ai += int(rng.integers(0, span)) * step
            bi += int(rng.integers(0, span)) * step
            ti += int(rng.integers(0, span)) * step
            j_cur = jj
            ea, eb, ec, ed = _complete_row_exact(ai, bi, ti, p, qq)
            pme = p ** (2 * m)
            img = substitute_linear_int(
                [int(x) % qq for x in coeffs], (ed * pme % qq, (-eb) % qq), ((-ec) * pme % qq, ea)
            )
            img = [x % qq for x in img]
            vals = [(_vp(x, p) if x else jj) for x in img]
            mv = min(vals)
            if mv < jj - 1:
                exps[idx] = vdisc + 2 * m * n * (n - 1) - (2 * n - 2) * mv
                break
            if jj > 400:
                raise RuntimeError("p-adic cell valuation failed to stabilize")
    return exps


def _padic_m_max(coeffs, p: int, n: int, vdisc: int, T: Fraction, lift_cap: int = 20000) -> int:
    """Deepest Cartan level whose shell can meet {H_p <= T}: scan levels and
    bound the minimal v_p of the layer discriminant via content lifting;
    stops after two consecutive excluded levels (saturation)."""
    tpow = T ** (2 * n - 2)
    # largest admissible exponent e with p^e <= T^{2n-2}
    e_max = 0
    while Fraction(p) ** (e_max + 1) <= tpow:
        e_max += 1
    m = 0
    best = 0
    misses = 0
    while m < 60:
        m += 1
        reachable = False
        for a_exp in range(0, 2 * m + 1):
            alpha, delta = p**a_exp, p ** (2 * m - a_exp)
            vd = 2 * m - a_exp
            i0 = next(i for i, c in enumerate(coeffs) if c != 0)
            cap = _vp(abs(int(coeffs[i0])), p) + i0 * a_exp + (n - i0) * vd
            # binary search the largest achievable content valuation
            lo, hi = 0, cap
            e_pair = _e_polys(coeffs, alpha)
            while lo < hi:
                mid = (lo + hi + 1) // 2
                needed = [max(0, mid - (n - j) * vd) for j in range(n + 1)]
                try:
                    res, _ = _lift_residues(e_pair, p, needed, lift_cap)
                except Exception:
                    res = [0]  # treat as achievable (conservative)
                if res:
                    lo = mid
                else:
                    hi = mid - 1
            v_layer = vdisc + (2 * n - 2) * (n * m - lo)
            if v_layer <= e_max:
                reachable = True
                break
        if reachable:
            best = m
            misses = 0
        else:
            misses += 1
            if misses >= 2:
                break
    return best


# ---------------------------------------------------------------------------
# volume estimation


@dataclass(frozen=True)
class VolumeSeries:
    thresholds: tuple
    estimates: tuple
    standard_errors: tuple
    samples_used: int
    t_max: float
    m_cuts: dict
    flags: tuple = ()

    def to_json(self) -> dict:
        return {
            "thresholds": [str(t) for t in self.thresholds],
            "estimates": list(self.estimates),
            "standard_errors": list(self.standard_errors),
            "samples_used": self.samples_used,
            "t_max": self.t_max,
            "m_cuts": {str(p): m for p, m in sorted(self.m_cuts.items())},
            "flags": list(self.flags),
        }


def _root_up(x: Fraction, k: int) -> Fraction:
    """Rational upper bound for x^(1/k)."""
    num, den = x.numerator, x.denominator
    scaled = num * den ** (k - 1)
    r = 1
    while r**k < scaled:
        r *= 2
    lo, hi = r // 2, r
    while lo < hi - 1:
        mid = (lo + hi) // 2
        if mid**k < scaled:
            lo = mid
        else:
            hi = mid
    return Fraction(hi, den)


def _strata(primes, m_cuts):
    """Cartesian product of per-prime shells with exact masses."""
    strata = [((), Fraction(1))]
    for p in primes:
        new = []
        for levels, mass in strata:
            for m in range(m_cuts[p] + 1):
                new.append((levels + ((p, m),), mass * shell_mass(p, m)))
        strata = new
    return strata


def estimate_volume(
    form: BinaryForm,
    places: PlaceSet,
    thresholds,
    samples: int = 200_000,
    seed: int = 0,
    min_per_stratum: int = 400,
) -> VolumeSeries:
    """Monte Carlo estimate of the Haar volume of {g in G : H(g.[f]) <= T}
    for each T in the increasing grid, sampled once at the largest T with
    per-(p-adic shell) stratification."""
    ts = [Fraction(t) for t in thresholds]
    if not ts or any(t2 <= t1 for t1, t2 in zip(ts, ts[1:])):
        raise ValueError("thresholds must be strictly increasing")
    f = normalize_primitive(form)
    n = f.degree
    disc = discriminant(f)
    if disc == 0:
        raise ValueError("volume requires nonzero discriminant")
    T_max = ts[-1]
    flags = []

    # archimedean cut: H_oo^(2n-2) = Q^(n-1)/|disc|, and H_p >= 1 always
    q_vol = _root_up(T_max ** (2 * n - 2) * abs(disc), n - 1) * Fraction(9, 8)
    cut = archimedean_cut(f, q_vol)
    if not cut.certified:
        flags.append("archimedean cut not certified")
    t_max = math.log(float(cut.rho))
    coeffs_int = [int(c) for c in f.coeffs]
    m_cuts = {}
    for p in places.primes:
        vdisc = _vp(abs(int(disc)), p)
        m_cuts[p] = _padic_m_max(coeffs_int, p, n, vdisc, T_max) + 1

    strata = _strata(list(places.primes), m_cuts)
    total_mass = sum(mass for _, mass in strata)
    alloc = []
    for levels, mass in strata:
        share = int(samples * mass / total_mass)
        alloc.append(max(min_per_stratum, share))
    arch_mass = math.cosh(t_max) - 1.0

    coeffs_float = np.array([float(c) for c in f.coeffs])
    log_thr = np.array([(2 * n - 2) * math.log(float(t)) for t in ts])
    log_disc = math.log(abs(float(disc)))
    est = np.zeros(len(ts))
    var = np.zeros(len(ts))
    used = 0
    seeds = np.random.SeedSequence(seed).spawn(len(strata))
    for (levels, mass), n_s, ss in zip(strata, alloc, seeds):
        rng = np.random.default_rng(ss)
        u = rng.random(n_s)
        t = np.arccosh(1.0 + u * arch_mass)
        theta = rng.random(n_s) * (2 * math.pi)
        rot = rotated_coeffs_float(coeffs_float, np.cos(theta), np.sin(theta))
        Q = weighted_q_float(rot, np.exp(t), n)
        logH = (n - 1) * np.log(np.maximum(Q, 1e-300)) - log_disc
        for p, m in levels:
            vdisc = _vp(abs(int(disc)), p)
            E = _padic_exponents(coeffs_int, p, m, vdisc, n, rng, n_s)
            logH = logH + E * math.log(p)
        w = float(mass) * arch_mass
        for i, lt in enumerate(log_thr):
            hit = logH <= lt
            ph = float(hit.mean())
            est[i] += w * ph
            var[i] += w * w * ph * (1.0 - ph) / n_s
        used += n_s
    return VolumeSeries(
        thresholds=tuple(ts),
        estimates=tuple(float(e) for e in est),
        standard_errors=tuple(float(math.sqrt(v)) for v in var),
        samples_used=used,
        t_max=t_max,
        m_cuts=m_cuts,
        flags=tuple(flags),
    )


@dataclass(frozen=True)
class WellRoundednessReport:
    thresholds: tuple
    upper_ratios: tuple  # V(T(1+eps))/V(T)
    lower_ratios: tuple  # V(T)/V(T(1-eps))
    epsilon: float
    standard_errors: tuple


def well_roundedness_diagnostic(
    form: BinaryForm,
    places: PlaceSet,
    thresholds,
    epsilon: float,
    samples: int = 200_000,
    seed: int = 0,
) -> WellRoundednessReport:
    """Ratios V(T(1 +/- eps))/V(T) along the grid; they tend to 1 for large
    T when the ball volumes are well rounded."""
    if not (0 <= epsilon <= 0.2):
        raise ValueError("epsilon must lie in [0, 0.2]")
    ts = [Fraction(t) for t in thresholds]
    if epsilon == 0:
        ones = tuple(1.0 for _ in ts)
        return WellRoundednessReport(tuple(ts), ones, ones, 0.0, tuple(0.0 for _ in ts))
    eps = Fraction(epsilon).limit_denominator(1000)
    grid = sorted({t for T in ts for t in (T * (1 - eps), T, T * (1 + eps))})
    series = estimate_volume(form, places, grid, samples=samples, seed=seed)
    val = dict(zip(series.thresholds, series.estimates))
    err = dict(zip(series.thresholds, series.standard_errors))
    up, lo, se = [], [], []
    for T in ts:
        v, vu, vl = val[T], val[T * (1 + eps)], val[T * (1 - eps)]
        up.append(vu / v if v > 0 else float("nan"))
        lo.append(v / vl if vl > 0 else float("nan"))
        rel = err[T] / v if v > 0 else 0.0
        relu = err[T * (1 + eps)] / vu if vu > 0 else 0.0
        se.append((vu / v) * math.sqrt(rel * rel + relu * relu) if v > 0 and vu > 0 else float("nan"))
    return WellRoundednessReport(tuple(ts), tuple(up), tuple(lo), float(epsilon), tuple(se))


@dataclass(frozen=True)
class RatioReport:
    thresholds: tuple
    ratios: tuple  # N(T)/V(T)
    log_slope: float  # slope of log(N/V) against log T over the top decade
    slope_stderr: float
    window: tuple


def ratio_convergence(counts, volumes) -> RatioReport:
    """N(T)/V(T) along aligned grids and the slope of log(N/V) vs log T over
    the top decade; slope near 0 is the testable convergence statement."""
    if tuple(counts.thresholds) != tuple(volumes.thresholds):
        raise ValueError("count and volume grids are not aligned")
    ts = [float(t) for t in counts.thresholds]
    ratios = []
    for nv, vv in zip(counts.group_counts, volumes.estimates):
        ratios.append(nv / vv if vv > 0 else float("nan"))
    t_hi = ts[-1]
    idx = [i for i, t in enumerate(ts) if t >= t_hi / 10 and np.isfinite(ratios[i]) and ratios[i] > 0]
    if len(idx) < 3:
        raise ValueError("not enough usable points in the top decade")
    x = np.log([ts[i] for i in idx])
    y = np.log([ratios[i] for i in idx])
    X = np.column_stack([np.ones_like(x), x])
    beta, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ beta
    dof = max(len(idx) - 2, 1)
    s2 = float(resid @ resid) / dof
    cov = s2 * np.linalg.inv(X.T @ X)
    return RatioReport(
        thresholds=tuple(counts.thresholds),
        ratios=tuple(ratios),
        log_slope=float(beta[1]),
        slope_stderr=float(math.sqrt(max(cov[1, 1], 0.0))),
        window=(idx[0], idx[-1] + 1),
    )
