"""Local regression smoothing and seasonal-trend decomposition.

The decomposition is the classic iterated scheme: cycle-subseries
smoothing, a moving-average low-pass to keep trend out of the seasonal,
and a trend smoother, optionally wrapped in bisquare robustness passes.
Components satisfy observed = trend + seasonal + remainder exactly, and
the seasonal is re-centered cycle by cycle (the offset moves into the
trend, which changes neither the identity nor the remainder).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .series import TimeSeries


@dataclass(frozen=True)
class Decomposition:
    """Additive components of a series."""

    observed: np.ndarray
    trend: np.ndarray
    seasonal: np.ndarray
    remainder: np.ndarray
    frequency: int

    def __post_init__(self):
        n = self.observed.size
        for name in ("trend", "seasonal", "remainder"):
            if getattr(self, name).size != n:
                raise ValueError(f"{name} length differs from observed")


def _next_odd(x: float) -> int:
    k = int(np.ceil(x))
    return k if k % 2 == 1 else k + 1


def _moving_average(y: np.ndarray, k: int) -> np.ndarray:
    return np.convolve(y, np.full(k, 1.0 / k), mode="valid")


def _bisquare(resid: np.ndarray) -> np.ndarray:
    scale = 6.0 * np.median(np.abs(resid))
    if scale <= 0:
        return np.ones_like(resid)
    u = np.clip(np.abs(resid) / scale, 0.0, 1.0)
    return (1.0 - u ** 2) ** 2


def _loess_uniform(y: np.ndarray, q: int, degree: int, eval_idx: np.ndarray,
                   rweights: Optional[np.ndarray] = None) -> np.ndarray:
    """Local polynomial regression on a unit-spaced grid.

    Evaluation indices may fall outside [0, n); the nearest q observations
    are used with tricube distance weights, scaled by q/n when the window
    is wider than the data. Output has one value per evaluation index.
    """
    n = y.size
    q_eff = min(q, n)
    e = np.asarray(eval_idx, dtype=int)
    out = np.empty(e.size, dtype=float)
    chunk = max(1, 5_000_000 // max(q_eff, 1))
    for lo in range(0, e.size, chunk):
        sel = e[lo:lo + chunk]
        starts = np.clip(sel - (q_eff - 1) // 2, 0, n - q_eff)
        idx = starts[:, None] + np.arange(q_eff)[None, :]
        t = idx.astype(float) - sel[:, None]
        d = np.abs(t)
        dmax = d.max(axis=1, keepdims=True)
        if q > n:
            dmax = dmax * (q / n)
        dmax = np.where(dmax <= 0, 1.0, dmax)
        u = np.clip(d / dmax, 0.0, 1.0)
        w = (1.0 - u ** 3) ** 3
        if rweights is not None:
            w2 = w * rweights[idx]
            # windows whose robustness weights vanish fall back to tricube
            dead = w2.sum(axis=1) <= 0
            w = np.where(dead[:, None], w, w2)
        yy = y[idx]
        if degree == 0:
            wsum = w.sum(axis=1)
            out[lo:lo + chunk] = (w * yy).sum(axis=1) / wsum
            continue
        powers = np.arange(degree + 1)
        # normalize positions by window radius; the intercept (the fitted
        # value at the evaluation point) is invariant to this scaling
        P = (t / dmax)[:, :, None] ** powers[None, None, :]
        Wp = w[:, :, None] * P
        A = np.einsum("bqi,bqj->bij", Wp, P)
        rhs = np.einsum("bqi,bq->bi", Wp, yy)
        ridge = 1e-12 * (1.0 + np.einsum("bii->b", A))
        A = A + np.eye(degree + 1)[None, :, :] * ridge[:, None, None]
        coef = np.linalg.solve(A, rhs[:, :, None])[:, :, 0]
        out[lo:lo + chunk] = coef[:, 0]
    return out


def loess(series, span: float = 0.5, degree: int = 1, robustness_iters: int = 0):
    """Smooth a sequence by local weighted polynomial regression.

    span is the fraction of points in each local window; degree the local
    polynomial order (0, 1, or 2). Optional robustness passes reweight by
    the bisquare of the residuals.
    """
    if isinstance(series, TimeSeries):
        y = series.values
        rewrap = series.with_values
    else:
        y = np.asarray(series, dtype=float)
        rewrap = lambda v: v  # noqa: E731
    n = y.size
    if not 0.0 < span <= 1.0:
        raise ValueError(f"span {span} must lie in (0, 1]")
    if degree not in (0, 1, 2):
        raise ValueError(f"degree must be 0, 1, or 2, got {degree}")
    q = int(np.ceil(span * n))
    if q < degree + 1:
        raise ValueError(
            f"window of {q} points is too small for degree {degree} "
            f"(needs at least {degree + 1})"
        )
    ev = np.arange(n)
    rw = None
    smoothed = _loess_uniform(y, q, degree, ev)
    for _ in range(robustness_iters):
        rw = _bisquare(y - smoothed)
        smoothed = _loess_uniform(y, q, degree, ev, rweights=rw)
    return rewrap(smoothed)


def stl_decompose(series: TimeSeries, robustness_iters: int = 1,
                  seasonal_window: int = 7, trend_window: Optional[int] = None,
                  lowpass_window: Optional[int] = None,
                  inner_iters: int = 2) -> Decomposition:
    """Iterated seasonal-trend decomposition by local regression.

    seasonal_window smooths each cycle subseries (degree 0); the low-pass
    stage is two m-term moving averages, a 3-term moving average, then a
    degree-1 smoother; the trend smoother is degree 1. Window widths are
    rounded up to odd. robustness_iters adds bisquare-weighted refits
    driven by the remainder.
    """
    m = series.frequency
    if m < 2:
        raise ValueError("seasonal decomposition requires frequency >= 2")
    y = series.values
    n = y.size
    if n < 2 * m:
        raise ValueError(
            f"need at least two full cycles ({2 * m} points), got {n}"
        )
    if robustness_iters < 0:
        raise ValueError("robustness_iters must be >= 0")
    n_s = _next_odd(max(seasonal_window, 3))
    n_l = _next_odd(lowpass_window) if lowpass_window else _next_odd(m)
    n_t = (_next_odd(trend_window) if trend_window
           else _next_odd(1.5 * m / (1.0 - 1.5 / n_s)))

    trend = np.zeros(n)
    seasonal = np.zeros(n)
    rw = np.ones(n)
    for outer in range(1 + robustness_iters):
        for _ in range(inner_iters):
            detrended = y - trend
            cext = np.empty(n + 2 * m)
            for pos in range(m):
                sub = detrended[pos::m]
                nsub = sub.size
                ev = np.arange(-1, nsub + 1)
                sm = _loess_uniform(sub, n_s, 0, ev, rweights=rw[pos::m])
                cext[pos + np.arange(nsub + 2) * m] = sm
            low = _moving_average(_moving_average(cext, m), m)
            low = _moving_average(low, 3)
            low = _loess_uniform(low, n_l, 1, np.arange(n))
            seasonal = cext[m:n + m] - low
            trend = _loess_uniform(y - seasonal, n_t, 1, np.arange(n),
                                   rweights=rw)
        remainder = y - trend - seasonal
        if outer < robustness_iters:
            rw = _bisquare(remainder)

    # re-center the seasonal cycle by cycle; the offset joins the trend
    # (a trailing partial cycle is left untouched)
    for c in range(n // m):
        sl = slice(c * m, (c + 1) * m)
        mu = seasonal[sl].mean()
        seasonal[sl] -= mu
        trend[sl] += mu
    remainder = y - trend - seasonal
    return Decomposition(observed=y.copy(), trend=trend, seasonal=seasonal,
                         remainder=remainder, frequency=m)


def loess_decompose(series: TimeSeries, span: float = 0.5,
                    robustness_iters: int = 1) -> Decomposition:
    """Trend-plus-remainder decomposition for non-seasonal series."""
    y = series.values
    if y.size < 4:
        raise ValueError("need at least 4 points")
    trend = loess(y, span=span, degree=1, robustness_iters=robustness_iters)
    seasonal = np.zeros_like(y)
    return Decomposition(observed=y.copy(), trend=trend, seasonal=seasonal,
                         remainder=y - trend, frequency=series.frequency)


def decompose(series: TimeSeries, robustness_iters: int = 1) -> Decomposition:
    """Seasonal path for frequency >= 2, trend-only path otherwise."""
    if series.frequency >= 2:
        return stl_decompose(series, robustness_iters=robustness_iters)
    return loess_decompose(series, robustness_iters=robustness_iters)
