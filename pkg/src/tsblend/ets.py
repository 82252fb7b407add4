"""Exponential smoothing: SES, Holt-Winters, and the additive ETS family.

All models here share one additive-error state recursion (level, optional
damped trend, optional additive seasonality). Fitting minimizes the
in-sample sum of squared one-step errors, which coincides with gaussian
maximum likelihood for this class. Smoothing parameters are searched
through logistic maps that keep them inside their bounds; because the
recursion is linear in the initial states, those are minimized exactly
by least squares at every parameter value, so the joint optimum needs a
simplex search over at most four dimensions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .kernels import ets_filter
from .numerics import FitError, nelder_mead
from .results import DEFAULT_LEVELS, ForecastResult, gaussian_forecast, \
    innovations_sigma
from .series import BoxCoxParams, TimeSeries, box_cox

TREND_CODES = {"N": 0, "A": 1, "Ad": 2}
SMOOTHING_BOUNDS = (1e-4, 0.9999)
DAMPING_BOUNDS = (0.8, 0.98)


@dataclass(frozen=True)
class EtsSpec:
    """Additive-error model shape: trend N/A/Ad, seasonal N/A, period m.

    m = 0 means take the period from the series at fit time.
    """

    trend: str = "N"
    seasonal: str = "N"
    m: int = 0
    error: str = "A"

    def __post_init__(self):
        if self.error != "A":
            raise ValueError("only additive errors are supported")
        if self.trend not in TREND_CODES:
            raise ValueError(f"trend must be one of N, A, Ad: {self.trend}")
        if self.seasonal not in ("N", "A"):
            raise ValueError(f"seasonal must be N or A: {self.seasonal}")
        if self.seasonal == "A" and self.m != 0 and self.m < 2:
            raise ValueError("additive seasonality needs period >= 2")

    def label(self) -> str:
        return f"ETS({self.error},{self.trend},{self.seasonal})"


@dataclass
class EtsFit:
    """Fitted smoothing state plus everything needed to forecast."""

    spec: EtsSpec
    alpha: float
    beta_star: float
    gamma: float
    phi: float
    level0: float
    trend0: float
    seasonal0: np.ndarray
    level: float
    trend: float
    seasonal: np.ndarray
    residuals: np.ndarray
    fitted: np.ndarray
    sse: float
    sigma2: float
    loglik: float
    aicc: float
    k: int
    n: int
    y: np.ndarray
    transform: Optional[BoxCoxParams] = None
    converged: bool = True


def _resolve_spec(series: TimeSeries, spec: EtsSpec) -> EtsSpec:
    if spec.seasonal == "N":
        return EtsSpec(trend=spec.trend, seasonal="N", m=0)
    m = series.frequency
    if spec.m not in (0, m):
        raise ValueError(
            f"spec period {spec.m} does not match series frequency {m}"
        )
    if m < 2:
        raise ValueError("additive seasonality needs series frequency >= 2")
    if series.n < 2 * m:
        raise ValueError(
            f"seasonal fit needs at least {2 * m} observations, "
            f"got {series.n}"
        )
    return EtsSpec(trend=spec.trend, seasonal="A", m=m)


def _logistic(raw: float, lo: float, hi: float) -> float:
    if raw >= 0:
        return lo + (hi - lo) / (1.0 + math.exp(-raw))
    ex = math.exp(raw)
    return lo + (hi - lo) * ex / (1.0 + ex)


def _logit(x: float, lo: float, hi: float) -> float:
    frac = min(max((x - lo) / (hi - lo), 1e-10), 1.0 - 1e-10)
    return math.log(frac / (1.0 - frac))


def fit_ets(series: TimeSeries, spec: EtsSpec,
            transform: Optional[BoxCoxParams] = None,
            tolerance: float = 1e-6,
            max_iter: Optional[int] = None,
            fixed_alpha: Optional[float] = None,
            fixed_level0: Optional[float] = None) -> EtsFit:
    """Fit one additive-error smoothing model by one-step SSE.

    fixed_alpha / fixed_level0 pin those quantities instead of
    optimizing them (used by the SES entry point and equivalence
    checks). Raises FitError when the optimizer fails to converge.
    """
    spec = _resolve_spec(series, spec)
    y = box_cox(series, transform).values if transform else \
        series.values.copy()
    n = y.size
    if n < 3:
        raise ValueError(f"need at least 3 observations, got {n}")
    trend_code = TREND_CODES[spec.trend]
    seasonal_on = spec.seasonal == "A"
    m = spec.m if seasonal_on else 1

    # the recursion is linear in the initial states for fixed smoothing
    # parameters, so states are minimized exactly by least squares inside
    # the objective and only the smoothing parameters face the simplex
    bounded: list[tuple[str, float, tuple[float, float]]] = []
    if fixed_alpha is None:
        bounded.append(("alpha", 0.3, SMOOTHING_BOUNDS))
    if trend_code != 0:
        bounded.append(("beta_star", 0.1, SMOOTHING_BOUNDS))
    if seasonal_on:
        bounded.append(("gamma", 0.1, SMOOTHING_BOUNDS))
    if trend_code == 2:
        bounded.append(("phi", 0.9, DAMPING_BOUNDS))
    state_dim = ((1 if fixed_level0 is None else 0)
                 + (1 if trend_code else 0)
                 + (m - 1 if seasonal_on else 0))

    def unpack_smoothing(raw: np.ndarray):
        values = {"alpha": fixed_alpha if fixed_alpha is not None else 0.0,
                  "beta_star": 0.0, "gamma": 0.0, "phi": 1.0}
        for i, (name, _, (lo, hi)) in enumerate(bounded):
            values[name] = _logistic(float(raw[i]), lo, hi)
        return values

    def build_states(free: np.ndarray):
        j = 0
        if fixed_level0 is None:
            level0 = float(free[j])
            j += 1
        else:
            level0 = fixed_level0
        trend0 = 0.0
        if trend_code != 0:
            trend0 = float(free[j])
            j += 1
        if seasonal_on:
            head = np.asarray(free[j:j + m - 1], dtype=float)
            seas0 = np.concatenate([head, [-head.sum()]])
        else:
            seas0 = np.zeros(1)
        return level0, trend0, seas0

    def residuals_at(values, free: np.ndarray) -> np.ndarray:
        level0, trend0, seas0 = build_states(free)
        e, _, _, _, _ = ets_filter(
            y, m, trend_code, seasonal_on, values["alpha"],
            values["beta_star"], values["gamma"], values["phi"],
            level0, trend0, seas0,
        )
        return e

    def profiled_states(values) -> tuple[float, np.ndarray]:
        base = residuals_at(values, np.zeros(state_dim))
        if state_dim == 0:
            return float(base @ base), np.zeros(0)
        design = np.empty((n, state_dim))
        for i in range(state_dim):
            unit = np.zeros(state_dim)
            unit[i] = 1.0
            design[:, i] = base - residuals_at(values, unit)
        states, *_ = np.linalg.lstsq(design, base, rcond=None)
        resid = base - design @ states
        return float(resid @ resid), states

    def objective(raw: np.ndarray) -> float:
        sse, _ = profiled_states(unpack_smoothing(raw))
        return sse if np.isfinite(sse) else np.inf

    start = np.array([_logit(v, lo, hi) for _, v, (lo, hi) in bounded])
    if start.size == 0:
        raw_best = start
        converged = True
    else:
        result = nelder_mead(objective, start, tolerance=tolerance,
                             max_iter=max_iter)
        raw_best = result.x
        converged = result.converged
        if not converged:
            raise FitError(
                f"{spec.label()} did not converge after restart "
                f"({result.iterations} iterations)",
                diagnostics=result,
            )

    values = unpack_smoothing(raw_best)
    _, states = profiled_states(values)
    level0, trend0, seas0 = build_states(states)
    e, fitted, level, trend, seas = ets_filter(
        y, m, trend_code, seasonal_on, values["alpha"],
        values["beta_star"], values["gamma"], values["phi"],
        level0, trend0, seas0,
    )
    sse = float(e @ e)
    sigma2 = sse / n
    loglik = (-0.5 * n * (math.log(max(sigma2, 1e-300))
                          + 1.0 + math.log(2.0 * math.pi)))
    k = len(bounded) + state_dim + 1
    aic = -2.0 * loglik + 2.0 * k
    denom = n - k - 1
    aicc = aic + 2.0 * k * (k + 1) / denom if denom > 0 else np.inf
    return EtsFit(
        spec=spec, alpha=values["alpha"], beta_star=values["beta_star"],
        gamma=values["gamma"], phi=values["phi"], level0=level0,
        trend0=trend0, seasonal0=seas0 if seasonal_on else np.zeros(0),
        level=float(level), trend=float(trend),
        seasonal=np.asarray(seas) if seasonal_on else np.zeros(0),
        residuals=e, fitted=fitted, sse=sse, sigma2=sigma2,
        loglik=loglik, aicc=aicc, k=k, n=n, y=y, transform=transform,
        converged=converged,
    )


def fit_ses(series: TimeSeries, alpha: Optional[float] = None,
            level0: Optional[float] = None,
            transform: Optional[BoxCoxParams] = None) -> EtsFit:
    """Simple exponential smoothing; alpha and the initial level can be
    pinned instead of estimated."""
    if alpha is not None and not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    return fit_ets(series, EtsSpec(trend="N", seasonal="N"),
                   transform=transform, fixed_alpha=alpha,
                   fixed_level0=level0)


def fit_holt_winters(series: TimeSeries, damped: bool = False,
                     transform: Optional[BoxCoxParams] = None) -> EtsFit:
    """Additive trend with additive seasonality when the series has a
    cycle; a non-seasonal series degrades to the plain linear trend."""
    m = series.frequency
    if series.n < 2 * m + 4:
        raise ValueError(
            f"need at least {2 * m + 4} observations, got {series.n}"
        )
    spec = EtsSpec(trend="Ad" if damped else "A",
                   seasonal="A" if m >= 2 else "N")
    return fit_ets(series, spec, transform=transform)


def fit_ets_auto(series: TimeSeries,
                 transform: Optional[BoxCoxParams] = None):
    """AICc selection over the additive candidate set.

    Seasonal candidates enter only when the series is long enough
    (n >= 2m + 4). Returns (spec, fit); raises FitError when every
    candidate fails.
    """
    m = series.frequency
    candidates = [EtsSpec(trend=t, seasonal="N") for t in ("N", "A", "Ad")]
    if m >= 2 and series.n >= 2 * m + 4:
        candidates += [EtsSpec(trend=t, seasonal="A")
                       for t in ("N", "A", "Ad")]
    best: Optional[tuple[EtsSpec, EtsFit]] = None
    best_aicc = np.inf
    failures = []
    for spec in candidates:
        try:
            fit = fit_ets(series, spec, transform=transform)
        except (ValueError, FitError) as err:
            failures.append((spec.label(), str(err)))
            continue
        if fit.aicc < best_aicc:
            best = (fit.spec, fit)
            best_aicc = fit.aicc
    if best is None:
        raise FitError("every candidate model failed to fit",
                       diagnostics=failures)
    return best


def _state_space(fit: EtsFit):
    trend_code = TREND_CODES[fit.spec.trend]
    m = fit.spec.m if fit.spec.seasonal == "A" else 0
    size = 1 + (1 if trend_code else 0) + m
    big_f = np.zeros((size, size))
    g = np.zeros(size)
    w = np.zeros(size)
    phi = fit.phi if trend_code == 2 else 1.0
    big_f[0, 0] = 1.0
    w[0] = 1.0
    g[0] = fit.alpha
    idx = 1
    if trend_code:
        big_f[0, 1] = phi
        big_f[1, 1] = phi
        w[1] = phi
        g[1] = fit.alpha * fit.beta_star
        idx = 2
    if m:
        # seasonal block rotates; the new s_t copies the slot m back
        big_f[idx, idx + m - 1] = 1.0
        for j in range(1, m):
            big_f[idx + j, idx + j - 1] = 1.0
        g[idx] = fit.gamma
        w[idx + m - 1] = 1.0
    return big_f, g, w


def forecast_ets(fit: EtsFit, h: int,
                 levels=DEFAULT_LEVELS) -> ForecastResult:
    """Mean path from the final states, variance from the innovations
    form of the same recursion."""
    if h < 1:
        raise ValueError(f"horizon must be at least 1, got {h}")
    trend_code = TREND_CODES[fit.spec.trend]
    hs = np.arange(1, h + 1, dtype=float)
    if trend_code == 0:
        mean = np.full(h, fit.level)
    elif trend_code == 1:
        mean = fit.level + hs * fit.trend
    else:
        # damped: cumulative geometric sum of phi^1..phi^j
        steps = np.cumsum(fit.phi ** hs)
        mean = fit.level + steps * fit.trend
    if fit.spec.seasonal == "A":
        m = fit.spec.m
        phases = (fit.n - 1 + np.arange(1, h + 1)) % m
        mean = mean + fit.seasonal[phases]
    big_f, g, w = _state_space(fit)
    sigma = innovations_sigma(big_f, g, w, fit.sigma2, h)
    return gaussian_forecast(mean, sigma, levels=levels,
                             transform=fit.transform)
