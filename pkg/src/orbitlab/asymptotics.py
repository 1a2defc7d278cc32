"""Least-squares recovery of growth parameters c T^a (log T)^{b-1}.

The fit runs on log N = log c + a log T + (b-1) log log T.  At desk scale
log log T is nearly collinear with the intercept, so the presence of the
log factor is decided by small-sample-corrected information criterion (AICc)
between the with-log and without-log models rather than by the raw (b-1)
coefficient.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

__all__ = ["FitResult", "ModelComparison", "Verdict", "fit", "fit_series", "compare_to_prediction"]


@dataclass(frozen=True)
class ModelComparison:
    delta_aicc: float  # AICc(no-log) - AICc(with-log); positive prefers the log model
    prefer_log: bool
    a_hat_no_log: float
    se_a_no_log: float


@dataclass(frozen=True)
class FitResult:
    a_hat: float
    b_hat: float
    log_c_hat: float
    residual_norm: float
    covariance: tuple  # 3x3, rows as tuples
    se_a: float
    se_b: float
    model_comparison: ModelComparison
    window: tuple
    degenerate_log_power: bool  # grid spans < 2 decades: (b-1) poorly identified

    def to_json(self) -> dict:
        return {
            "a_hat": self.a_hat,
            "b_hat": self.b_hat,
            "log_c_hat": self.log_c_hat,
            "residual_norm": self.residual_norm,
            "covariance": [list(r) for r in self.covariance],
            "se_a": self.se_a,
            "se_b": self.se_b,
            "window": list(self.window),
            "degenerate_log_power": self.degenerate_log_power,
            "model_comparison": {
                "delta_aicc": self.model_comparison.delta_aicc,
                "prefer_log": self.model_comparison.prefer_log,
                "a_hat_no_log": self.model_comparison.a_hat_no_log,
                "se_a_no_log": self.model_comparison.se_a_no_log,
            },
        }


def _wls(X: np.ndarray, y: np.ndarray, w: np.ndarray):
    """Weighted least squares; returns (beta, cov, rss)."""
    sw = np.sqrt(w)
    Xw = X * sw[:, None]
    yw = y * sw
    beta, *_ = np.linalg.lstsq(Xw, yw, rcond=None)
    resid = yw - Xw @ beta
    rss = float(resid @ resid)
    dof = max(len(y) - X.shape[1], 1)
    s2 = rss / dof
    cov = s2 * np.linalg.inv(Xw.T @ Xw)
    return beta, cov, rss


def _aicc(rss: float, npts: int, k: int) -> float:
    aic = npts * math.log(max(rss, 1e-300) / npts) + 2 * k
    if npts - k - 1 <= 0:
        return float("inf")
    return aic + 2 * k * (k + 1) / (npts - k - 1)


def fit(
    thresholds,
    values,
    window: tuple | None = None,
    sigma=None,
) -> FitResult:
    """Fit log v = log c + a log T + (b-1) log log T over the index window
    (default: upper half of the grid).  `sigma` supplies per-point standard
    errors of v for weighted fitting (error propagation: d log v = dv/v)."""
    ts = np.array([float(t) for t in thresholds], dtype=float)
    vs = np.array([float(v) for v in values], dtype=float)
    if window is None:
        window = (len(ts) // 2, len(ts))
    lo, hi = window
    ts, vs = ts[lo:hi], vs[lo:hi]
    sg = None
    if sigma is not None:
        sg = np.array([float(s) for s in sigma], dtype=float)[lo:hi]
    if len(ts) < 8:
        raise ValueError("need at least 8 grid points in the fit window")
    if np.any(vs <= 0):
        raise ValueError("fit window contains nonpositive values")
    if np.any(ts <= 1):
        raise ValueError("fit window must have thresholds > 1 (log log T)")
    span = ts[-1] / ts[0]
    if span < 10:
        raise ValueError("fit window must span at least one decade")
    degenerate = span < 100

    logT = np.log(ts)
    loglogT = np.log(np.log(ts))
    y = np.log(vs)
    if sg is not None:
        w = 1.0 / np.maximum(sg / vs, 1e-12) ** 2
    else:
        w = np.ones_like(y)

    X3 = np.column_stack([np.ones_like(logT), logT, loglogT])
    X2 = np.column_stack([np.ones_like(logT), logT])
    beta3, cov3, rss3 = _wls(X3, y, w)
    beta2, cov2, rss2 = _wls(X2, y, w)
    npts = len(y)
    delta = _aicc(rss2, npts, 2) - _aicc(rss3, npts, 3)
    comparison = ModelComparison(
        delta_aicc=float(delta),
        prefer_log=bool(delta > 0),
        a_hat_no_log=float(beta2[1]),
        se_a_no_log=float(math.sqrt(max(cov2[1, 1], 0.0))),
    )
    return FitResult(
        a_hat=float(beta3[1]),
        b_hat=float(beta3[2]) + 1.0,
        log_c_hat=float(beta3[0]),
        residual_norm=float(math.sqrt(rss3)),
        covariance=tuple(tuple(float(x) for x in row) for row in cov3),
        se_a=float(math.sqrt(max(cov3[1, 1], 0.0))),
        se_b=float(math.sqrt(max(cov3[2, 2], 0.0))),
        model_comparison=comparison,
        window=(lo, hi),
        degenerate_log_power=degenerate,
    )


def fit_series(series, use: str = "auto", window: tuple | None = None) -> FitResult:
    """Fit a CountSeries (group counts) or VolumeSeries (estimates with
    propagated Monte Carlo errors)."""
    if hasattr(series, "group_counts"):
        values = series.group_counts if use in ("auto", "group") else series.point_counts
        return fit(series.thresholds, values, window=window)
    if hasattr(series, "estimates"):
        return fit(series.thresholds, series.estimates, window=window, sigma=series.standard_errors)
    raise TypeError("expected a CountSeries or VolumeSeries")


@dataclass(frozen=True)
class Verdict:
    passed: bool
    a_hat: float
    a_target: float
    a_tolerance: float
    exponent_ok: bool
    log_power_target: int
    prefer_log: bool
    log_power_ok: bool

    def to_json(self) -> dict:
        return {
            "passed": self.passed,
            "a_hat": self.a_hat,
            "a_target": self.a_target,
            "a_tolerance": self.a_tolerance,
            "exponent_ok": self.exponent_ok,
            "log_power_target": self.log_power_target,
            "prefer_log": self.prefer_log,
            "log_power_ok": self.log_power_ok,
        }


def compare_to_prediction(result: FitResult, prediction: tuple, a_tol: float = 0.1) -> Verdict:
    """PASS iff |a_hat - a| <= a_tol and the model comparison prefers the
    log model exactly when the predicted log power is >= 1."""
    a_target, log_power = prediction
    a_target = float(Fraction(a_target)) if not isinstance(a_target, float) else a_target
    exponent_ok = abs(result.a_hat - a_target) <= a_tol
    log_ok = result.model_comparison.prefer_log == (log_power >= 1)
    return Verdict(
        passed=bool(exponent_ok and log_ok),
        a_hat=result.a_hat,
        a_target=a_target,
        a_tolerance=a_tol,
        exponent_ok=bool(exponent_ok),
        log_power_target=int(log_power),
        prefer_log=result.model_comparison.prefer_log,
        log_power_ok=bool(log_ok),
    )
