"""Moving-block bootstrap of decomposition remainders and bagged ETS.

Each replicate rebuilds the series from its smooth parts plus a
block-resampled remainder: transform by the Guerrero exponent, decompose
(seasonal series by the iterated seasonal-trend routine, others by a
loess trend), resample the remainder in contiguous blocks, recombine,
and invert the transform. The first replicate is always the original
series untouched. Bagging fits the automatic ETS selector to every
replicate and pools the forecast paths.
"""

from dataclasses import dataclass

import numpy as np

from .decomp import decompose
from .ets import fit_ets_auto, forecast_ets
from .numerics import FitError, RngStream
from .results import DEFAULT_LEVELS, ForecastResult, _check_levels
from .series import TimeSeries, box_cox, guerrero_lambda, inv_box_cox

DEFAULT_REPLICATES = 100
DEFAULT_BLOCK = 24  # two cycles of a monthly series


@dataclass(frozen=True)
class BootstrapConfig:
    """Replicate count, block size, and the stream that drives resampling.

    Replicate streams are derived from `rng` by index, so the same config
    reproduces the same replicate list no matter how often or in what
    order replicates are generated.
    """

    rng: RngStream
    B: int = DEFAULT_REPLICATES
    l: int = DEFAULT_BLOCK

    def __post_init__(self):
        if self.B < 2:
            raise ValueError(
                f"need at least 2 replicates (the first is the original "
                f"series), got B={self.B}"
            )
        if self.l < 2:
            raise ValueError(f"block size must be at least 2, got {self.l}")


def mbb(remainder, l: int, target_n: int, rng: RngStream) -> np.ndarray:
    """Resample a sequence by concatenating uniformly drawn blocks.

    Contiguous length-l blocks (there are n - l + 1 possible starts) are
    drawn with replacement and concatenated until at least target_n
    values are available; the trailing surplus is dropped.
    """
    rem = np.asarray(remainder, dtype=float)
    n = rem.size
    if l < 2:
        raise ValueError(f"block size must be at least 2, got {l}")
    if l > n:
        raise ValueError(f"block size {l} exceeds series length {n}")
    if target_n < 1:
        raise ValueError(f"target length must be positive, got {target_n}")
    nblocks = -(-target_n // l)
    starts = rng.generator().integers(0, n - l + 1, size=nblocks)
    out = np.concatenate([rem[s:s + l] for s in starts])
    return out[:target_n]


def generate_bootstrap_series(series: TimeSeries, config: BootstrapConfig,
                              bias_adjust: bool = False) -> list[TimeSeries]:
    """Build B series: the original plus B - 1 remainder-resampled copies.

    The series is power-transformed with the Guerrero exponent and split
    into trend, seasonal, and remainder parts. Replicates 2..B replace
    the remainder with a moving-block resample, recombine, and invert
    the transform plainly; `bias_adjust=True` switches the inversion to
    the mean-corrected form using the remainder variance. Decomposition
    errors (seasonal series too short, for example) propagate.

    The recombination is written as observed + (resample - remainder),
    which is the same sum as trend + seasonal + resample but keeps a
    degenerate resample (block size = n) bitwise equal to the input.
    """
    n = series.n
    if config.l > n:
        raise ValueError(
            f"block size {config.l} exceeds series length {n}"
        )
    params = guerrero_lambda(series)
    transformed = box_cox(series, params)
    parts = decompose(transformed)
    sigma2 = float(np.var(parts.remainder)) if bias_adjust else None
    roundtrip = inv_box_cox(transformed.values, params, sigma2=sigma2,
                            bias_adjust=bias_adjust)
    correction = series.values - roundtrip  # rounding-level

    out = [series]
    for b in range(1, config.B):
        resampled = mbb(parts.remainder, config.l, n,
                        config.rng.substream(b))
        recombined = transformed.values + (resampled - parts.remainder)
        values = inv_box_cox(recombined, params, sigma2=sigma2,
                             bias_adjust=bias_adjust) + correction
        out.append(series.with_values(values))
    return out


def bagged_ets(series: TimeSeries, config: BootstrapConfig, h: int,
               levels=DEFAULT_LEVELS) -> ForecastResult:
    """Forecast by pooling automatic ETS fits across bootstrap replicates.

    Every replicate gets its own model selection; the point forecast is
    the mean of the replicate forecast paths and the intervals are
    cross-replicate quantiles, so replicate spread stands in for
    parameter and model uncertainty. More than 20% failed replicate fits
    abort the whole forecast.
    """
    levels = _check_levels(levels)
    if h < 1:
        raise ValueError(f"horizon must be at least 1, got {h}")
    replicates = generate_bootstrap_series(series, config)
    paths = []
    failures = []
    for i, replicate in enumerate(replicates):
        try:
            _, fit = fit_ets_auto(replicate)
        except (ValueError, FitError) as err:
            failures.append((i, str(err)))
            continue
        paths.append(forecast_ets(fit, h).mean)
    if len(failures) > 0.2 * config.B:
        raise FitError(
            f"{len(failures)} of {config.B} replicate fits failed",
            diagnostics={"failures": failures},
        )
    stacked = np.vstack(paths)
    mean = stacked.mean(axis=0)
    sigma = stacked.std(axis=0, ddof=1)
    intervals = {}
    for level in levels:
        lo = np.quantile(stacked, (1.0 - level) / 2.0, axis=0)
        hi = np.quantile(stacked, (1.0 + level) / 2.0, axis=0)
        intervals[level] = (lo, hi)
    return ForecastResult(mean=mean, sigma=sigma, intervals=intervals,
                          levels=levels)
