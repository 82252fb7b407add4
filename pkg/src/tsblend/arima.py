"""ARIMA estimation, automatic order selection, harmonic regression.

Estimation runs in two stages: a conditional-sum-of-squares fit for a
good starting point, then exact gaussian maximum likelihood through the
state-space innovations filter with the disturbance variance
concentrated out. AR and MA coefficients are optimized through
tanh-mapped partial autocorrelations, which keeps every visited point
stationary and invertible. The MA polynomial uses the plus convention:
y_t includes +theta_j * eps_{t-j}.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .features import kpss_test, seasonal_strength
from .decomp import stl_decompose
from .kernels import arma_kalman, css_residuals
from .numerics import FitError, nelder_mead, ols
from .results import DEFAULT_LEVELS, ForecastResult, gaussian_forecast
from .series import BoxCoxParams, TimeSeries, box_cox, difference, undifference

MAX_ORDER = 5
SEASONAL_STRENGTH_CUTOFF = 0.64


@dataclass(frozen=True)
class ArimaSpec:
    """Model orders: AR p, differencing d, MA q, optional drift and
    seasonal differencing D at period m (m=0 means take the period from
    the series at fit time)."""

    p: int
    d: int
    q: int
    drift: bool = False
    D: int = 0
    m: int = 0

    def __post_init__(self):
        for name in ("p", "d", "q", "D", "m"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")

    def label(self) -> str:
        base = f"ARIMA({self.p},{self.d},{self.q})"
        if self.D:
            base += f"(0,{self.D},0)[{self.m}]"
        if self.drift:
            base += "+drift"
        return base


@dataclass(frozen=True)
class InfoCriteria:
    aic: float
    aicc: float
    bic: float
    k: int


@dataclass
class ArimaFit:
    """Fitted model state plus everything needed to forecast from it."""

    spec: ArimaSpec
    ar: np.ndarray
    ma: np.ndarray
    drift: float
    sigma2: float
    loglik: float
    residuals: np.ndarray
    fitted: np.ndarray
    nobs: int
    y: np.ndarray
    w: np.ndarray
    frequency: int
    transform: Optional[BoxCoxParams] = None
    converged: bool = True
    # asymptotic standard errors for (ar..., ma..., drift), NaN when the
    # observed information is singular at the optimum
    coef_stderr: Optional[np.ndarray] = None


def pacf_to_ar(partials: np.ndarray) -> np.ndarray:
    """Levinson step-up: partial autocorrelations to AR coefficients.

    Any input with entries in (-1, 1) yields a stationary polynomial.
    """
    k = partials.size
    coef = np.zeros(k)
    for j in range(k):
        new = partials[j]
        coef[:j] = coef[:j] - new * coef[:j][::-1]
        coef[j] = new
    return coef


def _unpack_params(raw: np.ndarray, p: int, q: int, drift: bool):
    ar = pacf_to_ar(np.tanh(raw[:p])) if p else np.zeros(0)
    # an invertible +theta polynomial is a stationary AR polynomial in
    # disguise, so reuse the same map with a sign flip
    ma = -pacf_to_ar(np.tanh(raw[p:p + q])) if q else np.zeros(0)
    c = raw[p + q] if drift else 0.0
    return ar, ma, c


def _coef_stderr(objective, raw_opt: np.ndarray, p: int, q: int,
                 drift: bool) -> np.ndarray:
    """Standard errors of the natural coefficients at the optimum.

    Curvature of the concentrated objective is measured in the
    unconstrained space (always evaluable), then pushed through the
    jacobian of the coefficient map. Any sign of a singular information
    matrix yields NaN entries rather than an exception.
    """
    k = raw_opt.size
    if k == 0:
        return np.zeros(0)
    nan = np.full(k, np.nan)
    f0 = objective(raw_opt)
    if not np.isfinite(f0):
        return nan
    h = 1e-4 * np.maximum(1.0, np.abs(raw_opt))

    def at(offsets):
        return objective(raw_opt + offsets)

    hess = np.empty((k, k))
    for i in range(k):
        ei = np.zeros(k)
        ei[i] = h[i]
        fp, fm = at(ei), at(-ei)
        if not (np.isfinite(fp) and np.isfinite(fm)):
            return nan
        hess[i, i] = (fp - 2.0 * f0 + fm) / (h[i] * h[i])
    for i in range(k):
        for j in range(i + 1, k):
            ei = np.zeros(k)
            ej = np.zeros(k)
            ei[i] = h[i]
            ej[j] = h[j]
            vals = [at(ei + ej), at(ei - ej), at(-ei + ej), at(-ei - ej)]
            if not all(np.isfinite(v) for v in vals):
                return nan
            hess[i, j] = hess[j, i] = (
                (vals[0] - vals[1] - vals[2] + vals[3])
                / (4.0 * h[i] * h[j])
            )

    def natural(raw):
        ar, ma, c = _unpack_params(raw, p, q, drift)
        parts = [ar, ma] + ([np.array([c])] if drift else [])
        return np.concatenate(parts) if parts else np.zeros(0)

    jac = np.empty((k, k))
    for i in range(k):
        ei = np.zeros(k)
        ei[i] = h[i]
        jac[:, i] = (natural(raw_opt + ei) - natural(raw_opt - ei)) \
            / (2.0 * h[i])
    try:
        var_raw = np.linalg.inv(hess)
    except np.linalg.LinAlgError:
        return nan
    var_nat = jac @ var_raw @ jac.T
    diag = np.diag(var_nat).copy()
    diag[diag <= 0] = np.nan
    return np.sqrt(diag)


def _resolve_spec(series: TimeSeries, spec: ArimaSpec) -> ArimaSpec:
    m = series.frequency
    if spec.D > 0 and m < 2:
        raise ValueError("seasonal differencing requires frequency >= 2")
    if spec.m not in (0, m):
        raise ValueError(
            f"spec period {spec.m} does not match series frequency {m}"
        )
    return dataclasses.replace(spec, m=m if spec.D > 0 else max(spec.m, 0))


def fit_arima(series: TimeSeries, spec: ArimaSpec,
              transform: Optional[BoxCoxParams] = None,
              tolerance: float = 1e-8,
              max_iter: Optional[int] = None) -> ArimaFit:
    """Two-stage ARIMA fit (conditional sum of squares, then exact ML).

    With a transform attached the model is fitted on the transformed
    scale and forecasts invert it. Raises FitError if the optimizer
    fails to converge even after its restart.
    """
    spec = _resolve_spec(series, spec)
    y = box_cox(series, transform).values if transform else series.values
    work = TimeSeries(y, frequency=series.frequency)
    w = difference(work, spec.d, spec.D).values if spec.d + spec.D else y.copy()
    nd = w.size
    p, q = spec.p, spec.q
    if nd <= p + q + 1:
        raise ValueError(
            f"differenced length {nd} is too short for p={p}, q={q}"
        )

    def split_objective(raw, exact):
        ar, ma, c = _unpack_params(raw, p, q, spec.drift)
        centered = w - c
        if exact:
            v, big_f, ok = arma_kalman(centered, ar, ma)
            if not ok:
                return np.inf
            s2 = float(np.mean(v * v / big_f))
            if not s2 > 1e-300:
                return np.inf
            return 0.5 * nd * math.log(s2) + 0.5 * float(np.sum(np.log(big_f)))
        e = css_residuals(centered, ar, ma, p)
        sse = float(e[p:] @ e[p:])
        if not sse > 0:
            return -np.inf if sse == 0 else np.inf
        return 0.5 * nd * math.log(sse / nd)

    n_par = p + q + (1 if spec.drift else 0)
    if n_par == 0:
        raw_best = np.zeros(0)
        converged = True
    elif p + q == 0:
        # drift alone: the gaussian ML solution is the sample mean
        raw_best = np.array([w.mean()])
        converged = True
    else:
        start = np.zeros(n_par)
        if spec.drift:
            start[-1] = w.mean()
        css = nelder_mead(lambda r: split_objective(r, exact=False), start,
                          tolerance=tolerance, max_iter=max_iter)
        refined = nelder_mead(lambda r: split_objective(r, exact=True), css.x,
                              tolerance=tolerance, max_iter=max_iter)
        raw_best = refined.x
        converged = refined.converged
        if not converged:
            raise FitError(
                f"{spec.label()} did not converge after restart "
                f"({refined.iterations} iterations)",
                diagnostics=refined,
            )

    ar, ma, c = _unpack_params(raw_best, p, q, spec.drift)
    centered = w - c
    v, big_f, ok = arma_kalman(centered, ar, ma)
    if not ok:
        raise FitError(f"{spec.label()} state filter degenerate at optimum")
    sigma2 = float(np.mean(v * v / big_f))
    loglik = (-0.5 * nd * (math.log(2.0 * math.pi) + 1.0 + math.log(sigma2))
              - 0.5 * float(np.sum(np.log(big_f))))
    resid = css_residuals(centered, ar, ma, p)
    offset = y.size - nd
    fitted = y.copy()
    fitted[offset:] = y[offset:] - resid
    stderr = _coef_stderr(lambda r: split_objective(r, exact=True),
                          raw_best, p, q, spec.drift)
    return ArimaFit(
        spec=spec, ar=ar, ma=ma, drift=float(c), sigma2=sigma2,
        loglik=loglik, residuals=resid, fitted=fitted, nobs=nd, y=y, w=w,
        frequency=series.frequency, transform=transform, converged=converged,
        coef_stderr=stderr,
    )


def info_criteria(fit: ArimaFit, n: Optional[int] = None) -> InfoCriteria:
    """AIC family with k = p + q + drift + 1 (the variance counts)."""
    n = fit.nobs if n is None else n
    k = fit.spec.p + fit.spec.q + (1 if fit.spec.drift else 0) + 1
    aic = -2.0 * fit.loglik + 2.0 * k
    denom = n - k - 1
    aicc = aic + 2.0 * k * (k + 1) / denom if denom > 0 else np.inf
    bic = aic + (math.log(n) - 2.0) * k
    return InfoCriteria(aic=aic, aicc=aicc, bic=bic, k=k)


def _ar_polynomial(ar: np.ndarray, d: int, D: int, m: int) -> np.ndarray:
    poly = np.concatenate([[1.0], -ar])
    for _ in range(d):
        poly = np.convolve(poly, [1.0, -1.0])
    if D:
        seasonal = np.zeros(m + 1)
        seasonal[0], seasonal[m] = 1.0, -1.0
        for _ in range(D):
            poly = np.convolve(poly, seasonal)
    return poly


def _psi_from_poly(poly: np.ndarray, ma: np.ndarray, count: int) -> np.ndarray:
    psi = np.zeros(count)
    psi[0] = 1.0
    for j in range(1, count):
        acc = ma[j - 1] if j - 1 < ma.size else 0.0
        for i in range(1, min(j, poly.size - 1) + 1):
            acc -= poly[i] * psi[j - i]
        psi[j] = acc
    return psi


def psi_weights(fit: ArimaFit, count: int) -> np.ndarray:
    """Impulse-response weights of the stationary ARMA part."""
    if count < 1:
        raise ValueError("count must be >= 1")
    return _psi_from_poly(np.concatenate([[1.0], -fit.ar]), fit.ma, count)


def forecast_arima(fit: ArimaFit, h: int,
                   levels=DEFAULT_LEVELS) -> ForecastResult:
    """Mean path by the ARMA recursion on the differenced scale, then
    integration; variances accumulate squared impulse-response weights of
    the full (differenced) operator."""
    if h < 1:
        raise ValueError("horizon must be >= 1")
    spec = fit.spec
    p, q = spec.p, spec.q
    w_ext = np.concatenate([fit.w, np.zeros(h)])
    e_ext = np.concatenate([fit.residuals, np.zeros(h)])
    nd = fit.nobs
    for t in range(nd, nd + h):
        acc = fit.drift
        for i in range(p):
            acc += fit.ar[i] * (w_ext[t - 1 - i] - fit.drift)
        for j in range(q):
            acc += fit.ma[j] * e_ext[t - 1 - j]
        w_ext[t] = acc
    k = spec.d + spec.D * spec.m
    if k:
        rebuilt = undifference(w_ext, fit.y[:k], spec.d, spec.D, spec.m)
        mean = rebuilt[fit.y.size:]
    else:
        mean = w_ext[nd:]
    poly = _ar_polynomial(fit.ar, spec.d, spec.D, spec.m)
    psi = _psi_from_poly(poly, fit.ma, h)
    sigma = np.sqrt(fit.sigma2 * np.cumsum(psi ** 2))
    return gaussian_forecast(mean, sigma, levels=levels,
                             transform=fit.transform)


# candidates whose ARMA roots sit this close to the unit circle are
# treated as inadmissible during the stepwise search: they are boundary
# fits (spurious cycles, over-differencing pile-up) that win on raw
# likelihood without describing real structure
ROOT_MARGIN = 0.01
# minimum separation between AR and MA inverse roots; closer pairs mean
# the polynomials share a near-common factor and the fit is redundant
CANCEL_MARGIN = 0.15
# a candidate order is kept only when its highest-lag coefficients are
# distinguishable from zero at this z threshold (two-sided 1% level), a
# conservative form of the usual final order-reduction check
SEARCH_T = 2.576


def _inverse_roots(coef: np.ndarray) -> np.ndarray:
    trimmed = np.asarray(coef, dtype=float)
    while trimmed.size and abs(trimmed[-1]) < 1e-10:
        trimmed = trimmed[:-1]
    if not trimmed.size:
        return np.empty(0, dtype=complex)
    return np.roots(np.concatenate([[1.0], trimmed]))


def _search_admissible(fit: ArimaFit) -> bool:
    ar_inv = _inverse_roots(-fit.ar)
    ma_inv = _inverse_roots(fit.ma)
    for inv in (ar_inv, ma_inv):
        if inv.size and np.max(np.abs(inv)) > 1.0 / (1.0 + ROOT_MARGIN):
            return False
    if ar_inv.size and ma_inv.size:
        gaps = np.abs(ar_inv[:, None] - ma_inv[None, :])
        if np.min(gaps) < CANCEL_MARGIN:
            return False
    p, q = fit.spec.p, fit.spec.q
    se = fit.coef_stderr
    if se is not None:
        for coef, idx in ((fit.ar[p - 1], p - 1) if p else (None, 0),
                          (fit.ma[q - 1], p + q - 1) if q else (None, 0)):
            if coef is None:
                continue
            t = coef / se[idx]
            if not np.isfinite(t) or abs(t) < SEARCH_T:
                return False
    return True


def _auto_seasonal_difference(series: TimeSeries) -> int:
    m = series.frequency
    n = series.n
    if m < 2 or n < 2 * m:
        return 0
    try:
        subseries = -(-n // m)
        dec = stl_decompose(series, seasonal_window=10 * subseries + 1)
    except ValueError:
        return 0
    return 1 if seasonal_strength(dec) >= SEASONAL_STRENGTH_CUTOFF else 0


def auto_arima(series: TimeSeries, max_p: int = MAX_ORDER,
               max_q: int = MAX_ORDER, seasonal: bool = True,
               transform: Optional[BoxCoxParams] = None,
               trace: Optional[list] = None):
    """Stepwise AICc search over ARIMA orders.

    Seasonal differencing (0 or 1) is decided first by the seasonal
    strength of the decomposition, then regular differencing by repeated
    stationarity testing (d capped at 2). The neighborhood moves are the
    six (p, q) steps of distance one plus a drift toggle; ties prefer
    fewer parameters. Returns (spec, fit); pass a list as `trace` to
    collect (spec, aicc) pairs in evaluation order.
    """
    n = series.n
    if n < 30:
        raise ValueError(f"need at least 30 observations, got {n}")
    modeling = (TimeSeries(box_cox(series, transform).values,
                           frequency=series.frequency)
                if transform else series)
    big_d = _auto_seasonal_difference(modeling) if seasonal else 0
    work = difference(modeling, 0, big_d) if big_d else modeling
    d = 0
    while d < 2:
        if np.var(work.values) <= 0:
            break
        if kpss_test(work.values).p_value >= 0.05:
            break
        work = difference(work, 1, 0)
        d += 1
    drift_allowed = d + big_d <= 1

    cache: dict = {}

    def evaluate(p: int, q: int, drift: bool):
        key = (p, q, drift)
        if key in cache:
            return cache[key]
        spec = ArimaSpec(p=p, d=d, q=q, drift=drift, D=big_d)
        try:
            fit = fit_arima(series, spec, transform=transform)
            aicc = info_criteria(fit).aicc
            if not _search_admissible(fit):
                fit, aicc = None, np.inf
        except (ValueError, FitError, np.linalg.LinAlgError):
            fit, aicc = None, np.inf
        cache[key] = (spec, fit, aicc)
        if trace is not None:
            trace.append((spec, aicc))
        return cache[key]

    def better(candidate, incumbent):
        c_spec, _, c_aicc = candidate
        i_spec, _, i_aicc = incumbent
        c_key = (c_aicc, c_spec.p + c_spec.q, c_spec.p, c_spec.drift)
        i_key = (i_aicc, i_spec.p + i_spec.q, i_spec.p, i_spec.drift)
        return c_key < i_key

    best = None
    for p0, q0 in ((2, 2), (1, 0), (0, 1), (0, 0)):
        if p0 > max_p or q0 > max_q:
            continue
        cand = evaluate(p0, q0, drift_allowed)
        if best is None or better(cand, best):
            best = cand
    improved = True
    while improved:
        improved = False
        p, q = best[0].p, best[0].q
        drift = best[0].drift
        moves = [(p + 1, q, drift), (p - 1, q, drift),
                 (p, q + 1, drift), (p, q - 1, drift),
                 (p + 1, q + 1, drift), (p - 1, q - 1, drift)]
        if drift_allowed:
            moves.append((p, q, not drift))
        for mp, mq, mdrift in moves:
            if not (0 <= mp <= max_p and 0 <= mq <= max_q):
                continue
            cand = evaluate(mp, mq, mdrift)
            if better(cand, best):
                best = cand
                improved = True
    if best is None or best[1] is None:
        raise FitError(
            "every candidate model failed to fit",
            diagnostics=trace if trace is not None else list(cache.values()),
        )
    # the fit carries the resolved spec (seasonal period filled in)
    return best[1].spec, best[1]


# ---------------------------------------------------------------------------
# harmonic regression with ARIMA errors
# ---------------------------------------------------------------------------

def fourier_terms(n: int, m: int, K: int, start: int = 1) -> np.ndarray:
    """Seasonal sine/cosine design matrix for t = start..start+n-1.

    Columns are ordered (s_1, c_1, ..., s_K, c_K); at K = m/2 the sine
    column is identically zero at integer t and is dropped.
    """
    if m < 2:
        raise ValueError("period must be >= 2")
    if not 1 <= K <= m / 2:
        raise ValueError(f"harmonic count {K} must satisfy 1 <= K <= {m / 2}")
    t = np.arange(start, start + n, dtype=float)
    cols = []
    for k in range(1, K + 1):
        angle = 2.0 * math.pi * k * t / m
        if 2 * k != m:
            cols.append(np.sin(angle))
        cols.append(np.cos(angle))
    return np.column_stack(cols)


@dataclass
class DhrFit:
    """Harmonic regression with an ARIMA error process."""

    intercept: float
    coef: np.ndarray
    coef_stderr: np.ndarray
    K: int
    m: int
    arima_spec: ArimaSpec
    arima_fit: ArimaFit
    aicc: float
    fitted: np.ndarray
    residuals: np.ndarray
    n: int
    transform: Optional[BoxCoxParams] = None


def _fit_dhr_fixed(series: TimeSeries, m: int, K: int,
                   transform: Optional[BoxCoxParams]) -> DhrFit:
    y = box_cox(series, transform).values if transform else series.values
    n = y.size
    if n < 4 * K + 10:
        raise ValueError(f"need at least {4 * K + 10} points for K={K}")
    terms = fourier_terms(n, m, K)
    design = np.column_stack([np.ones(n), terms])
    reg = ols(design, y)
    resid_series = TimeSeries(reg.residuals, frequency=1)
    spec, err_fit = auto_arima(resid_series, seasonal=False)
    crit = info_criteria(err_fit)
    # the regression adds intercept + harmonic columns to the count
    joint_aicc = crit.aicc + 2.0 * design.shape[1]
    fitted = reg.fitted + err_fit.fitted
    return DhrFit(
        intercept=float(reg.coef[0]), coef=reg.coef[1:].copy(),
        coef_stderr=reg.stderr[1:].copy(), K=K, m=m, arima_spec=spec,
        arima_fit=err_fit, aicc=joint_aicc, fitted=fitted,
        residuals=err_fit.residuals.copy(), n=n, transform=transform,
    )


def fit_dhr(series: TimeSeries, K="auto", m: Optional[int] = None,
            transform: Optional[BoxCoxParams] = None) -> DhrFit:
    """Regress on seasonal harmonics, then model the residuals with a
    non-seasonal automatic ARIMA fit.

    K="auto" scans 1..m/2 and keeps the lowest joint AICc (the ARIMA
    AICc plus two per regression coefficient).
    """
    m = series.frequency if m is None else m
    if m < 2:
        raise ValueError("harmonic regression needs a seasonal period >= 2")
    if K == "auto":
        best: Optional[DhrFit] = None
        for k in range(1, m // 2 + 1):
            if series.n < 4 * k + 10:
                break
            cand = _fit_dhr_fixed(series, m, k, transform)
            if best is None or cand.aicc < best.aicc:
                best = cand
        if best is None:
            raise ValueError(
                f"series of {series.n} points is too short for any K"
            )
        return best
    return _fit_dhr_fixed(series, m, int(K), transform)


def forecast_dhr(fit: DhrFit, h: int, levels=DEFAULT_LEVELS) -> ForecastResult:
    """Deterministic harmonic path plus the error-process forecast.

    Uncertainty comes from the error process alone; regression
    uncertainty is not propagated (two-stage estimation).
    """
    if h < 1:
        raise ValueError("horizon must be >= 1")
    future = fourier_terms(h, fit.m, fit.K, start=fit.n + 1)
    err = forecast_arima(fit.arima_fit, h, levels=levels)
    mean = fit.intercept + future @ fit.coef + err.mean
    return gaussian_forecast(mean, err.sigma, levels=levels,
                             transform=fit.transform)
