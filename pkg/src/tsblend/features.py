"""Series characteristics, correlograms, order identification, stationarity.

The characteristic vector bundles trend and seasonal strength from the
additive decomposition, a portmanteau serial-correlation statistic, the
absolute-third-moment skewness, kurtosis (without the excess-3 shift),
and a rescaled-range Hurst exponent. Each raw statistic also gets a
squashed copy in [0, 1] via 1 - exp(-a * s); the per-statistic constants
are fixed here and were chosen so the expected squashed value on
gaussian white noise stays below 0.2 (see scripts/calibrate_scaling.py).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .decomp import Decomposition, loess_decompose, stl_decompose
from .numerics import ols
from .series import TimeSeries

# squashing constants for the scaled characteristic copies; white-noise
# expectations of the raw statistics are roughly F_T 0.13, F_S 0.06
# (periodic-window decomposition), Q_20 ~ 19, skewness ~ 1.59 (E|Z|^3),
# kurtosis ~ 3, Hurst ~ 0.58
SCALING_CONSTANTS = {
    "trend_strength": 1.2,
    "seasonal_strength": 1.2,
    "box_pierce": 0.005,
    "skewness": 0.10,
    "kurtosis": 0.05,
    "hurst": 0.30,
}

BOX_PIERCE_LAGS = 20


def squash(value: float, constant: float) -> float:
    """Map a nonnegative statistic into [0, 1)."""
    if math.isnan(value):
        return float("nan")
    return 1.0 - math.exp(-constant * max(value, 0.0))


@dataclass(frozen=True)
class FeatureVector:
    """Raw series characteristics plus squashed copies in [0, 1]."""

    trend_strength: float
    seasonal_strength: float
    box_pierce: float
    skewness: float
    kurtosis: float
    hurst: float
    scaled: dict
    box_pierce_lags: int = BOX_PIERCE_LAGS
    seasonal_available: bool = True

    def as_dict(self) -> dict:
        return {
            "trend_strength": self.trend_strength,
            "seasonal_strength": self.seasonal_strength,
            "box_pierce": self.box_pierce,
            "skewness": self.skewness,
            "kurtosis": self.kurtosis,
            "hurst": self.hurst,
            "scaled": dict(self.scaled),
            "box_pierce_lags": self.box_pierce_lags,
            "seasonal_available": self.seasonal_available,
        }


@dataclass(frozen=True)
class Correlogram:
    """Sample autocorrelations and partial autocorrelations for lags 1..L."""

    lags: np.ndarray
    acf: np.ndarray
    pacf: np.ndarray
    bound: float
    n: int


@dataclass(frozen=True)
class EacfTable:
    """Order-identification grid over AR rows and MA columns.

    symbols[p][q] is "o" where the scaled statistic is inside its
    two-sided 5% band, "x" outside.
    """

    symbols: list
    statistics: np.ndarray
    max_p: int
    max_q: int
    n: int

    def render(self) -> str:
        width = max(2, len(str(self.max_q)))
        cells = lambda items: "".join(f"{c:>{width + 1}}" for c in items)  # noqa: E731
        body_width = (width + 1) * (self.max_q + 1)
        lines = [" " * 2 + "MA".center(body_width).rstrip()]
        lines.append("AR" + cells(range(self.max_q + 1)))
        for p in range(self.max_p + 1):
            lines.append(f"{p:>2}" + cells(self.symbols[p]))
        return "\n".join(lines)

    def vertex(self) -> Optional[tuple]:
        """Smallest (p, q) by p+q then p whose upper-left triangle is all "o".

        The triangle anchored at (p, q) is the cells (p, q+j) and the
        diagonal continuation (p+i, q+i+j); here we check the practical
        version: the full row tail starting at (p, q).
        """
        candidates = []
        for p in range(self.max_p + 1):
            for q in range(self.max_q + 1):
                if all(self.symbols[p][j] == "o"
                       for j in range(q, self.max_q + 1)):
                    candidates.append((p, q))
                    break
        if not candidates:
            return None
        return min(candidates, key=lambda pq: (pq[0] + pq[1], pq[0]))


@dataclass(frozen=True)
class StationarityReport:
    """Outcome of a unit-root or stationarity hypothesis test."""

    test: str
    statistic: float
    lag_order: int
    p_value: float
    p_bracket: str
    stationary: bool
    significance: float = 0.05

    def describe(self) -> str:
        p_text = self.p_bracket if self.p_bracket else f"{self.p_value:.4f}"
        verdict = "stationary" if self.stationary else "non-stationary"
        return (f"{self.test}: statistic {self.statistic:.4f}, "
                f"lag order {self.lag_order}, p {p_text} -> {verdict}")


def _values(series) -> np.ndarray:
    if isinstance(series, TimeSeries):
        return series.values
    return np.asarray(series, dtype=float)


def acf(series, max_lag: int) -> np.ndarray:
    """Sample autocorrelations for lags 0..max_lag (biased estimator)."""
    y = _values(series)
    n = y.size
    if not 1 <= max_lag < n:
        raise ValueError(f"max_lag {max_lag} must satisfy 1 <= max_lag < {n}")
    yc = y - y.mean()
    denom = yc @ yc
    if denom <= 0:
        raise ValueError("autocorrelation undefined for a constant series")
    out = np.empty(max_lag + 1)
    out[0] = 1.0
    for k in range(1, max_lag + 1):
        out[k] = (yc[:-k] @ yc[k:]) / denom
    return out


def pacf(series, max_lag: int) -> np.ndarray:
    """Partial autocorrelations for lags 1..max_lag (Durbin-Levinson)."""
    r = acf(series, max_lag)
    phi = np.zeros((max_lag + 1, max_lag + 1))
    out = np.empty(max_lag)
    phi[1, 1] = r[1]
    out[0] = r[1]
    for k in range(2, max_lag + 1):
        prev = phi[k - 1, 1:k]
        den = 1.0 - prev @ r[1:k]
        num = r[k] - prev @ r[k - 1:0:-1]
        phi_kk = num / den if abs(den) > 1e-14 else 0.0
        phi[k, k] = phi_kk
        phi[k, 1:k] = prev - phi_kk * prev[::-1]
        out[k - 1] = phi_kk
    return out


def acf_pacf(series, max_lag: int = 24) -> Correlogram:
    """Correlogram with the usual two-sided gaussian bounds."""
    y = _values(series)
    n = y.size
    r = acf(y, max_lag)
    p = pacf(y, max_lag)
    return Correlogram(
        lags=np.arange(1, max_lag + 1),
        acf=r[1:].copy(),
        pacf=p,
        bound=1.96 / math.sqrt(n),
        n=n,
    )


def trend_strength(dec: Decomposition) -> float:
    """Share of detrended variance explained by the trend, clamped to [0, 1]."""
    var_r = np.var(dec.remainder)
    var_tr = np.var(dec.trend + dec.remainder)
    if var_tr <= 0:
        return 0.0
    return max(0.0, 1.0 - var_r / var_tr)


def seasonal_strength(dec: Decomposition) -> float:
    """Share of deseasonalized variance explained by the seasonal."""
    var_r = np.var(dec.remainder)
    var_sr = np.var(dec.seasonal + dec.remainder)
    if var_sr <= 0:
        return 0.0
    return max(0.0, 1.0 - var_r / var_sr)


def box_pierce_statistic(series, lags: int = BOX_PIERCE_LAGS) -> float:
    """n times the sum of squared autocorrelations over lags 1..lags."""
    y = _values(series)
    n = y.size
    h = min(lags, n - 1)
    r = acf(y, h)
    return float(n * np.sum(r[1:] ** 2))


def hurst_exponent(series) -> float:
    """Rescaled-range estimate of long-range dependence.

    Window sizes double from 8 up to n/2 (n/2 itself is always included);
    the estimate is the slope of log mean(R/S) against log window size,
    clamped to [0, 1].
    """
    y = _values(series)
    n = y.size
    sizes = []
    w = 8
    while w <= n // 2:
        sizes.append(w)
        w *= 2
    if n // 2 >= 8 and (not sizes or sizes[-1] != n // 2):
        sizes.append(n // 2)
    if len(sizes) < 2:
        raise ValueError(f"series of {n} points is too short (need >= 18)")
    log_w = []
    log_rs = []
    for w in sizes:
        segments = y[: (n // w) * w].reshape(n // w, w)
        z = segments - segments.mean(axis=1, keepdims=True)
        cum = np.cumsum(z, axis=1)
        spread = cum.max(axis=1) - cum.min(axis=1)
        sd = segments.std(axis=1)
        keep = sd > 0
        if not np.any(keep):
            continue
        ratio = np.mean(spread[keep] / sd[keep])
        if ratio > 0:
            log_w.append(math.log(w))
            log_rs.append(math.log(ratio))
    if len(log_w) < 2:
        raise ValueError("rescaled-range regression degenerate")
    slope = np.polyfit(log_w, log_rs, 1)[0]
    return float(min(1.0, max(0.0, slope)))


def characteristics(series: TimeSeries, lags: int = BOX_PIERCE_LAGS) -> FeatureVector:
    """Compute the raw characteristic vector and its squashed copy.

    Seasonal strength needs at least two full cycles; shorter (or
    non-seasonal) series get NaN there with seasonal_available False.
    """
    y = series.values
    n = y.size
    if n < 18:
        raise ValueError(f"need at least 18 observations, got {n}")
    if np.var(y) <= 0:
        raise ValueError("characteristics undefined for a constant series")
    m = series.frequency
    seasonal_ok = m >= 2 and n >= 2 * m
    if seasonal_ok:
        # near-periodic seasonal window: a stable per-position seasonal
        # keeps white noise from inflating the seasonal strength
        subseries = -(-n // m)
        dec = stl_decompose(series, seasonal_window=10 * subseries + 1)
        f_s = seasonal_strength(dec)
    else:
        dec = loess_decompose(series)
        f_s = float("nan")
    f_t = trend_strength(dec)
    q = box_pierce_statistic(y, lags)
    sigma = y.std()
    centered = y - y.mean()
    skew = float(np.sum(np.abs(centered) ** 3) / (n * sigma ** 3))
    kurt = float(np.sum(centered ** 4) / (n * sigma ** 4))
    hurst = hurst_exponent(y)
    raw = {
        "trend_strength": f_t,
        "seasonal_strength": f_s,
        "box_pierce": q,
        "skewness": skew,
        "kurtosis": kurt,
        "hurst": hurst,
    }
    scaled = {k: squash(v, SCALING_CONSTANTS[k]) for k, v in raw.items()}
    return FeatureVector(
        trend_strength=f_t,
        seasonal_strength=f_s,
        box_pierce=q,
        skewness=skew,
        kurtosis=kurt,
        hurst=hurst,
        scaled=scaled,
        box_pierce_lags=min(lags, n - 1),
        seasonal_available=seasonal_ok,
    )


def _ar_ols_coeffs(y: np.ndarray, order: int) -> np.ndarray:
    if order == 0:
        return np.zeros(0)
    n = y.size
    target = y[order:]
    cols = [y[order - 1 - i: n - 1 - i] for i in range(order)]
    design = np.column_stack(cols)
    coef, *_ = np.linalg.lstsq(design, target, rcond=None)
    return coef


def _residual_acf(y: np.ndarray, coeffs: np.ndarray, lag: int) -> float:
    m = coeffs.size
    resid = y[m:].copy()
    for i in range(m):
        resid -= coeffs[i] * y[m - 1 - i: y.size - 1 - i]
    centered = resid - resid.mean()
    denom = centered @ centered
    if denom <= 0 or lag >= resid.size:
        return 0.0
    return float((centered[:-lag] @ centered[lag:]) / denom)


def eacf(series, max_p: int = 7, max_q: int = 13) -> EacfTable:
    """Iterated-regression order-identification table.

    Cell (p, q) holds the lag-(q+1) autocorrelation of the series
    filtered by the stage-q iterated AR(p) coefficients; "o" marks cells
    inside +-1.96/sqrt(n - p - q).
    """
    y = _values(series)
    y = y - y.mean()
    n = y.size
    if n <= max_p + max_q + 2:
        raise ValueError(
            f"need more than {max_p + max_q + 2} points for the "
            f"{max_p}x{max_q} grid, got {n}"
        )
    kmax = max_p + max_q
    current = [_ar_ols_coeffs(y, k) for k in range(kmax + 1)]
    stats = np.zeros((max_p + 1, max_q + 1))
    for p in range(max_p + 1):
        stats[p, 0] = _residual_acf(y, current[p], 1)
    for j in range(1, max_q + 1):
        top = kmax - j
        nxt = []
        for m in range(top + 1):
            longer = current[m + 1]
            shorter = current[m]
            den = shorter[m - 1] if m >= 1 else -1.0
            lam = longer[m] / den if abs(den) > 1e-12 else 0.0
            coef = np.empty(m)
            for i in range(1, m + 1):
                below = shorter[i - 2] if i >= 2 else -1.0
                coef[i - 1] = longer[i - 1] - below * lam
            nxt.append(coef)
        current = nxt
        for p in range(max_p + 1):
            stats[p, j] = _residual_acf(y, current[p], j + 1)
    symbols = []
    for p in range(max_p + 1):
        row = []
        for q in range(max_q + 1):
            bound = 1.96 / math.sqrt(n - p - q)
            row.append("o" if abs(stats[p, q]) < bound else "x")
        symbols.append(row)
    return EacfTable(symbols=symbols, statistics=stats,
                     max_p=max_p, max_q=max_q, n=n)


# interpolation grid for the trend-inclusive unit-root test: rows are
# sample sizes, columns the probability points of the tau distribution
_ADF_SIZES = np.array([25.0, 50.0, 100.0, 250.0, 500.0, 1e5])
_ADF_PROBS = np.array([0.01, 0.025, 0.05, 0.10, 0.90, 0.95, 0.975, 0.99])
_ADF_TABLE = -np.array([
    [4.38, 3.95, 3.60, 3.24, 1.14, 0.80, 0.50, 0.15],
    [4.15, 3.80, 3.50, 3.18, 1.19, 0.87, 0.58, 0.24],
    [4.04, 3.73, 3.45, 3.15, 1.22, 0.90, 0.62, 0.28],
    [3.99, 3.69, 3.43, 3.13, 1.23, 0.92, 0.64, 0.31],
    [3.98, 3.68, 3.42, 3.13, 1.24, 0.93, 0.65, 0.32],
    [3.96, 3.66, 3.41, 3.12, 1.25, 0.94, 0.66, 0.33],
])


def adf_test(series, lag_order: Optional[int] = None,
             significance: float = 0.05) -> StationarityReport:
    """Unit-root test with constant and linear trend in the regression.

    The statistic is the t-ratio of the lagged level in a regression of
    the first difference on [1, t, y_{t-1}, lagged differences]. The
    p-value interpolates an embedded critical-value grid and is clamped
    to [0.01, 0.99] with bracket notation at the edges. A small p rejects
    the unit root, so the verdict reads stationary.
    """
    y = _values(series)
    n = y.size
    if lag_order is None:
        lag_order = int((n - 1) ** (1.0 / 3.0))
    if lag_order < 0:
        raise ValueError("lag_order must be >= 0")
    if n <= lag_order + 3:
        raise ValueError(
            f"need more than {lag_order + 3} points for lag order "
            f"{lag_order}, got {n}"
        )
    dy = np.diff(y)
    rows = n - 1 - lag_order
    target = dy[lag_order:]
    cols = [np.ones(rows), np.arange(rows, dtype=float), y[lag_order:n - 1]]
    for i in range(1, lag_order + 1):
        cols.append(dy[lag_order - i:n - 1 - i])
    try:
        fit = ols(np.column_stack(cols), target)
    except ValueError as exc:
        raise ValueError(f"unit-root regression failed: {exc}") from None
    tau = fit.coef[2] / fit.stderr[2]
    crit = np.array([
        np.interp(n, _ADF_SIZES, _ADF_TABLE[:, i])
        for i in range(_ADF_PROBS.size)
    ])
    p = float(np.interp(tau, crit, _ADF_PROBS))
    bracket = ""
    if tau < crit[0]:
        p, bracket = 0.01, "< 0.01"
    elif tau > crit[-1]:
        p, bracket = 0.99, "> 0.99"
    return StationarityReport(
        test="ADF", statistic=float(tau), lag_order=lag_order,
        p_value=p, p_bracket=bracket, stationary=p < significance,
        significance=significance,
    )


_KPSS_CRIT = np.array([0.347, 0.463, 0.574, 0.739])
_KPSS_PROBS = np.array([0.10, 0.05, 0.025, 0.01])


def kpss_test(series, significance: float = 0.05) -> StationarityReport:
    """Level-stationarity test with Bartlett-window long-run variance.

    The null is stationarity, so a large p keeps the stationary verdict.
    p is interpolated from the embedded quantiles and clamped to
    [0.01, 0.10] with brackets at the edges.
    """
    y = _values(series)
    n = y.size
    if n < 12:
        raise ValueError(f"need at least 12 points, got {n}")
    e = y - y.mean()
    lag = int(4.0 * (n / 100.0) ** 0.25)
    s2 = float(e @ e) / n
    for s in range(1, lag + 1):
        weight = 1.0 - s / (lag + 1.0)
        s2 += 2.0 * weight * float(e[s:] @ e[:-s]) / n
    partial = np.cumsum(e)
    if s2 <= 0:
        stat = 0.0
    else:
        stat = float(np.sum(partial ** 2) / (n ** 2 * s2))
    p = float(np.interp(stat, _KPSS_CRIT, _KPSS_PROBS))
    bracket = ""
    if stat < _KPSS_CRIT[0]:
        p, bracket = 0.10, "> 0.10"
    elif stat > _KPSS_CRIT[-1]:
        p, bracket = 0.01, "< 0.01"
    return StationarityReport(
        test="KPSS", statistic=stat, lag_order=lag,
        p_value=p, p_bracket=bracket, stationary=p > significance,
        significance=significance,
    )
