"""Forecast containers and the interval arithmetic shared by every model
family.

All models produce gaussian forecasts on their modeling scale; this module
turns (mean, sigma) paths into interval tables and, when a power transform
is attached, maps everything back to the data scale with the bias-adjusted
inverse for the point forecast and direct quantile mapping for the bounds.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .numerics import normal_quantile
from . import series as _series


DEFAULT_LEVELS = (0.80, 0.95)


@dataclass(frozen=True)
class ForecastResult:
    """Per-horizon forecast means, scales, and central intervals.

    `sigma` is on the same scale as `mean` (delta-method adjusted when a
    transform was inverted). `intervals` maps confidence level to a
    (lower, upper) pair of arrays.
    """

    mean: np.ndarray
    sigma: np.ndarray
    intervals: dict[float, tuple[np.ndarray, np.ndarray]]
    levels: tuple[float, ...]

    @property
    def horizon(self) -> int:
        return int(self.mean.size)

    def half_width(self, level: float) -> np.ndarray:
        lo, hi = self.intervals[level]
        return (hi - lo) / 2.0


def _check_levels(levels) -> tuple[float, ...]:
    out = tuple(float(a) for a in levels)
    for a in out:
        if not 0.0 < a < 1.0:
            raise ValueError(f"confidence level {a} must lie strictly in (0, 1)")
    return out


def _clamp_to_domain(values: np.ndarray, transform) -> np.ndarray:
    """Pull interval bounds into the inverse transform's domain.

    A wide gaussian bound on the transformed scale can cross the point
    where lam*z+1 hits zero; the monotone inverse maps everything beyond
    it to the edge of the back-transformed support, so clamping there is
    the correct quantile image.
    """
    lam = transform.lam
    if lam == 0:
        return values
    edge = (1e-12 - 1.0) / lam
    if lam > 0:
        return np.maximum(values, edge)
    return np.minimum(values, edge)


def gaussian_forecast(mean, sigma, levels=DEFAULT_LEVELS, transform=None) -> ForecastResult:
    """Build a ForecastResult from modeling-scale means and standard errors.

    Without a transform the intervals are mean +/- z * sigma. With one, the
    bounds are the plain inverse of the transformed bounds (quantiles map
    through monotone functions, and bounds beyond the inverse's domain
    clamp to the edge of the support), the point forecast uses the
    bias-adjusted inverse, and sigma is rescaled by the inverse's slope at
    the mean.
    """
    mean = np.asarray(mean, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    if mean.shape != sigma.shape or mean.ndim != 1:
        raise ValueError("mean and sigma must be one-dimensional and congruent")
    if np.any(sigma < 0):
        raise ValueError("sigma must be nonnegative")
    levels = _check_levels(levels)

    intervals: dict[float, tuple[np.ndarray, np.ndarray]] = {}
    if transform is None:
        for a in levels:
            z = normal_quantile(0.5 + a / 2.0)
            intervals[a] = (mean - z * sigma, mean + z * sigma)
        return ForecastResult(mean=mean, sigma=sigma, intervals=intervals, levels=levels)

    for a in levels:
        z = normal_quantile(0.5 + a / 2.0)
        lo = _series.inv_box_cox(_clamp_to_domain(mean - z * sigma, transform),
                                 transform)
        hi = _series.inv_box_cox(_clamp_to_domain(mean + z * sigma, transform),
                                 transform)
        intervals[a] = (lo, hi)
    point = _series.inv_box_cox(mean, transform, sigma2=sigma ** 2, bias_adjust=True)
    slope = _series.inv_box_cox_slope(mean, transform)
    return ForecastResult(mean=point, sigma=sigma * slope, intervals=intervals, levels=levels)


def innovations_sigma(F: np.ndarray, g: np.ndarray, w: np.ndarray,
                      sigma2: float, h: int) -> np.ndarray:
    """Forecast standard errors of a linear innovations state-space model.

    With transition F, innovation loading g, and measurement vector w acting
    on the previous state, the h-step error variance is
    sigma2 * (1 + sum_{j<h} (w' F^(j-1) g)^2).
    """
    if h < 1:
        raise ValueError("horizon must be at least 1")
    var = np.empty(h)
    var[0] = sigma2
    vec = g.copy()
    acc = 1.0
    for j in range(1, h):
        c = float(w @ vec)
        acc += c * c
        var[j] = sigma2 * acc
        vec = F @ vec
    return np.sqrt(var)
