"""Series container, CSV ingestion, power transforms, differencing, and
chronological splitting.

A TimeSeries is an immutable float vector plus a seasonal period and an
optional monthly calendar anchor. Monthly series carry YYYY-MM labels;
anything else falls back to integer period ids, which keeps the CSV format
round-trippable for both.
"""

from __future__ import annotations

import csv
import io
import re
from dataclasses import dataclass, field, replace
from typing import Iterable, Optional, Sequence

import numpy as np

from .util import atomic_write_text


_MONTH_RE = re.compile(r"^(\d{4})-(\d{2})$")
_DATE_RE = re.compile(r"^(\d{4})-(\d{2})-(\d{2})$")
_INT_RE = re.compile(r"^-?\d+$")


def _month_add(year: int, month: int, k: int):
    idx = (year * 12 + (month - 1)) + k
    return idx // 12, idx % 12 + 1


@dataclass(frozen=True, eq=False)
class TimeSeries:
    """Evenly spaced univariate series.

    frequency is the number of periods per seasonal cycle (12 for monthly
    data with an annual cycle, 1 for non-seasonal). start_year anchors the
    series on a calendar when the data is monthly; otherwise periods are
    plain integers starting at start_period.
    """

    values: np.ndarray
    frequency: int = 1
    start_year: Optional[int] = None
    start_period: int = 1

    def __post_init__(self):
        vals = np.array(self.values, dtype=float, copy=True)
        if vals.ndim != 1 or vals.size == 0:
            raise ValueError("series values must be a nonempty vector")
        if not np.all(np.isfinite(vals)):
            bad = int(np.nonzero(~np.isfinite(vals))[0][0])
            raise ValueError(f"series contains a non-finite value at index {bad}")
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)
        if int(self.frequency) != self.frequency or self.frequency < 1:
            raise ValueError(f"frequency must be a positive integer, got {self.frequency}")
        object.__setattr__(self, "frequency", int(self.frequency))
        if self.start_year is not None:
            if self.frequency != 12:
                raise ValueError("calendar anchors are only supported for monthly series")
            if not 1 <= self.start_period <= 12:
                raise ValueError(f"start month {self.start_period} out of range 1..12")

    def __len__(self) -> int:
        return int(self.values.size)

    @property
    def n(self) -> int:
        return int(self.values.size)

    def period_label(self, i: int) -> str:
        if self.start_year is not None:
            y, m = _month_add(self.start_year, self.start_period, i)
            return f"{y:04d}-{m:02d}"
        return str(self.start_period + i)

    def period_labels(self) -> list[str]:
        return [self.period_label(i) for i in range(self.n)]

    def advance(self, k: int) -> "TimeSeries":
        """Anchor of the period k steps after this series' first period."""
        if self.start_year is not None:
            y, m = _month_add(self.start_year, self.start_period, k)
            return replace(self, start_year=y, start_period=m)
        return replace(self, start_period=self.start_period + k)

    def with_values(self, values) -> "TimeSeries":
        return TimeSeries(values=np.asarray(values, dtype=float),
                          frequency=self.frequency,
                          start_year=self.start_year,
                          start_period=self.start_period)

    def slice(self, start: int, stop: int) -> "TimeSeries":
        if not 0 <= start < stop <= self.n:
            raise ValueError(f"bad slice [{start}, {stop}) for length {self.n}")
        out = self.with_values(self.values[start:stop])
        return out.advance(start) if start else out

    def append(self, extra) -> "TimeSeries":
        extra = np.atleast_1d(np.asarray(extra, dtype=float))
        return self.with_values(np.concatenate([self.values, extra]))


# ---------------------------------------------------------------------------
# CSV ingestion / serialization
# ---------------------------------------------------------------------------

def load_csv(path: str, value_column: str, date_column: str,
             frequency: int = 12) -> TimeSeries:
    """Read a two-plus-column CSV into a TimeSeries.

    Periods are ISO months (YYYY-MM), full dates (YYYY-MM-DD, aggregated to
    calendar months by summing the value column), or plain integers. Rows
    may arrive in any order; gaps and duplicate month-level rows are
    rejected with the offending period named.
    """
    with open(path, "r", encoding="utf-8", newline="") as handle:
        reader = csv.DictReader(handle)
        if reader.fieldnames is None:
            raise ValueError(f"{path}: file is empty")
        for col in (value_column, date_column):
            if col not in reader.fieldnames:
                raise ValueError(
                    f"{path}: column {col!r} not found; available columns: "
                    f"{', '.join(reader.fieldnames)}"
                )
        rows = list(reader)
    if not rows:
        raise ValueError(f"{path}: no data rows")

    monthly: dict[tuple[int, int], float] = {}
    month_granular: set[tuple[int, int]] = set()
    integer: dict[int, float] = {}
    kind = None
    for lineno, row in enumerate(rows, start=2):
        raw_date = (row[date_column] or "").strip()
        raw_value = (row[value_column] or "").strip()
        try:
            value = float(raw_value)
        except ValueError:
            raise ValueError(
                f"{path}: row {lineno}: cannot parse value {raw_value!r}"
            ) from None
        if not np.isfinite(value):
            raise ValueError(f"{path}: row {lineno}: non-finite value {raw_value!r}")

        m = _MONTH_RE.match(raw_date)
        d = _DATE_RE.match(raw_date)
        i = _INT_RE.match(raw_date)
        if m or d:
            if kind == "int":
                raise ValueError(f"{path}: row {lineno}: mixed integer and date periods")
            kind = "date"
            year = int((m or d).group(1))
            month = int((m or d).group(2))
            if not 1 <= month <= 12:
                raise ValueError(f"{path}: row {lineno}: month out of range in {raw_date!r}")
            if d:
                day = int(d.group(3))
                if not 1 <= day <= 31:
                    raise ValueError(f"{path}: row {lineno}: day out of range in {raw_date!r}")
            key = (year, month)
            if m:
                if key in monthly:
                    raise ValueError(
                        f"{path}: row {lineno}: duplicate period {year:04d}-{month:02d}"
                    )
                month_granular.add(key)
                monthly[key] = monthly.get(key, 0.0) + value
            else:
                if key in month_granular:
                    raise ValueError(
                        f"{path}: row {lineno}: duplicate period {year:04d}-{month:02d}"
                    )
                monthly[key] = monthly.get(key, 0.0) + value
        elif i:
            if kind == "date":
                raise ValueError(f"{path}: row {lineno}: mixed integer and date periods")
            kind = "int"
            key_i = int(raw_date)
            if key_i in integer:
                raise ValueError(f"{path}: row {lineno}: duplicate period {key_i}")
            integer[key_i] = value
        else:
            raise ValueError(
                f"{path}: row {lineno}: cannot parse period {raw_date!r} "
                f"(expected YYYY-MM, YYYY-MM-DD, or an integer)"
            )

    if kind == "date":
        if frequency != 12:
            raise ValueError("date-labeled input implies monthly data; pass frequency=12")
        keys = sorted(monthly)
        (y0, m0), (y1, m1) = keys[0], keys[-1]
        span = (y1 * 12 + m1) - (y0 * 12 + m0) + 1
        if span != len(keys):
            have = set(keys)
            y, m = y0, m0
            for _ in range(span):
                if (y, m) not in have:
                    raise ValueError(f"{path}: missing period {y:04d}-{m:02d}")
                y, m = _month_add(y, m, 1)
        values = np.array([monthly[k] for k in keys])
        return TimeSeries(values=values, frequency=12, start_year=y0, start_period=m0)

    keys_i = sorted(integer)
    if keys_i[-1] - keys_i[0] + 1 != len(keys_i):
        have_i = set(keys_i)
        for k in range(keys_i[0], keys_i[-1] + 1):
            if k not in have_i:
                raise ValueError(f"{path}: missing period {k}")
    values = np.array([integer[k] for k in keys_i])
    return TimeSeries(values=values, frequency=frequency,
                      start_year=None, start_period=keys_i[0])


def format_csv(series: TimeSeries) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\r\n")
    writer.writerow(["period", "value"])
    for label, v in zip(series.period_labels(), series.values):
        writer.writerow([label, format(v, ".17g")])
    return buf.getvalue()


def save_csv(series: TimeSeries, path: str) -> None:
    """Write `period,value` rows; the write is atomic."""
    atomic_write_text(path, format_csv(series))


# ---------------------------------------------------------------------------
# power transform
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BoxCoxParams:
    """Power-transform parameters.

    shift is added before transforming (used when the data touches zero or
    below); degenerate marks a selection that fell back to lam=1 because
    the variance-profile objective was undefined.
    """

    lam: float
    shift: float = 0.0
    degenerate: bool = False


def _unwrap(series):
    if isinstance(series, TimeSeries):
        return series.values, series
    return np.asarray(series, dtype=float), None


def _rewrap(values: np.ndarray, template):
    if template is not None:
        return template.with_values(values)
    return values


def box_cox(series, params: BoxCoxParams):
    """Power transform: (y^lam - 1)/lam, or log y when lam = 0.

    The shift in `params` is applied first; every shifted value must be
    strictly positive.
    """
    y, template = _unwrap(series)
    x = y + params.shift
    if np.any(x <= 0):
        bad = int(np.nonzero(x <= 0)[0][0])
        raise ValueError(
            f"power transform needs positive values; index {bad} is "
            f"{y[bad]} (shift {params.shift})"
        )
    if params.lam == 0.0:
        out = np.log(x)
    elif abs(params.lam) < 1e-4:
        # the direct form cancels catastrophically near lam = 0
        out = np.expm1(params.lam * np.log(x)) / params.lam
    else:
        out = (np.power(x, params.lam) - 1.0) / params.lam
    return _rewrap(out, template)


def inv_box_cox(series, params: BoxCoxParams, sigma2=None, bias_adjust: bool = False):
    """Invert the power transform, optionally with variance bias adjustment.

    The plain inverse maps a transformed value straight back. With
    bias_adjust the result approximates the mean of the back-transformed
    distribution given forecast variance sigma2: the inverse is multiplied
    by (1 + sigma2/2) at lam = 0 and by
    (1 + sigma2 (1-lam) / (2 (lam y + 1)^2)) otherwise.
    """
    y, template = _unwrap(series)
    if bias_adjust and sigma2 is None:
        raise ValueError("bias adjustment requires sigma2")
    if params.lam == 0.0:
        base = np.exp(y)
        if bias_adjust:
            base = base * (1.0 + np.asarray(sigma2, dtype=float) / 2.0)
    else:
        core = params.lam * y + 1.0
        if np.any(core <= 0):
            bad = int(np.nonzero(core <= 0)[0][0])
            raise ValueError(
                f"inverse transform undefined at index {bad}: lam*y+1 = {core[bad]}"
            )
        if abs(params.lam) < 1e-4:
            base = np.exp(np.log1p(params.lam * y) / params.lam)
        else:
            base = np.power(core, 1.0 / params.lam)
        if bias_adjust:
            s2 = np.asarray(sigma2, dtype=float)
            base = base * (1.0 + s2 * (1.0 - params.lam) / (2.0 * core ** 2))
    out = base - params.shift
    return _rewrap(out, template)


def inv_box_cox_slope(values, params: BoxCoxParams) -> np.ndarray:
    """Derivative of the plain inverse transform, for delta-method scales."""
    y = np.asarray(values, dtype=float)
    if params.lam == 0.0:
        return np.exp(y)
    core = params.lam * y + 1.0
    if np.any(core <= 0):
        raise ValueError("inverse transform slope undefined: lam*y+1 <= 0")
    return np.power(core, 1.0 / params.lam - 1.0)


def guerrero_lambda(series, lower: float = -1.0, upper: float = 2.0,
                    step: float = 0.001) -> BoxCoxParams:
    """Pick the transform exponent by the variance-profile method.

    The series is cut into consecutive season-length blocks (trailing
    blocks kept when the length is not a multiple; block length 2 for
    non-seasonal series), and lam minimizes the coefficient of variation of
    sd(block) / mean(block)^(1-lam) over a fixed grid. Exact ties resolve
    toward lam = 1. A constant series makes the objective undefined
    everywhere; that returns lam = 1 flagged degenerate.
    """
    y, _ = _unwrap(series)
    m = series.frequency if isinstance(series, TimeSeries) else 1
    block = max(2, int(m))
    shift = float(abs(y.min()) + 1.0) if y.min() <= 0 else 0.0
    x = y + shift
    nblocks = x.size // block
    if nblocks < 2:
        raise ValueError(
            f"need at least two season-length blocks ({2 * block} points), got {x.size}"
        )
    mat = x[x.size - nblocks * block:].reshape(nblocks, block)
    sd = mat.std(axis=1, ddof=1)
    mean = mat.mean(axis=1)

    if np.all(sd == 0.0):
        return BoxCoxParams(lam=1.0, shift=shift, degenerate=True)

    lams = np.arange(lower, upper + step / 2, step)
    # ratios[i, j] = sd_j / mean_j^(1 - lam_i)
    ratios = sd[None, :] / np.power(mean[None, :], 1.0 - lams[:, None])
    cv = ratios.std(axis=1, ddof=1) / ratios.mean(axis=1)
    finite = np.isfinite(cv)
    if not np.any(finite):
        return BoxCoxParams(lam=1.0, shift=shift, degenerate=True)
    best = np.min(cv[finite])
    tied = finite & (cv <= best * (1.0 + 1e-12) + 1e-300)
    candidates = lams[tied]
    lam = float(candidates[np.argmin(np.abs(candidates - 1.0))])
    return BoxCoxParams(lam=round(lam, 6), shift=shift, degenerate=False)


# ---------------------------------------------------------------------------
# differencing
# ---------------------------------------------------------------------------

def _diff_coeffs(d: int, D: int, m: int) -> np.ndarray:
    coeff = np.array([1.0])
    for _ in range(d):
        coeff = np.convolve(coeff, [1.0, -1.0])
    seasonal = np.zeros(m + 1)
    seasonal[0], seasonal[m] = 1.0, -1.0
    for _ in range(D):
        coeff = np.convolve(coeff, seasonal)
    return coeff


def difference(series: TimeSeries, d: int = 1, D: int = 0) -> TimeSeries:
    """Apply d regular and D seasonal differences."""
    if d < 0 or D < 0:
        raise ValueError("difference orders must be nonnegative")
    m = series.frequency
    if D > 0 and m < 2:
        raise ValueError("seasonal differencing requires frequency >= 2")
    drop = d + D * m
    if series.n <= drop:
        raise ValueError(
            f"series of length {series.n} is too short for d={d}, D={D} "
            f"(needs more than {drop} points)"
        )
    out = series.values
    for _ in range(d):
        out = out[1:] - out[:-1]
    for _ in range(D):
        out = out[m:] - out[:-m]
    return series.with_values(out).advance(drop)


def undifference(diffed, initial, d: int = 1, D: int = 0, m: int = 1) -> np.ndarray:
    """Integrate a differenced sequence back given the original's first
    d + D*m values. Exact inverse of `difference`."""
    w, _ = _unwrap(diffed)
    init = np.asarray(initial, dtype=float)
    k = d + D * m
    if init.size != k:
        raise ValueError(f"need exactly {k} initial values, got {init.size}")
    coeff = _diff_coeffs(d, D, m)
    n = w.size + k
    y = np.empty(n)
    y[:k] = init
    for t in range(k, n):
        acc = w[t - k]
        for j in range(1, coeff.size):
            acc -= coeff[j] * y[t - j]
        y[t] = acc
    return y


# ---------------------------------------------------------------------------
# chronological splitting
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SplitSpec:
    """Chronological train/validation/test fractions (must sum to one)."""

    train: float = 0.80
    validation: float = 0.15
    test: float = 0.05

    def __post_init__(self):
        for name, v in (("train", self.train), ("validation", self.validation),
                        ("test", self.test)):
            if not 0.0 < v < 1.0:
                raise ValueError(f"{name} fraction {v} must lie strictly in (0, 1)")
        if abs(self.train + self.validation + self.test - 1.0) > 1e-9:
            raise ValueError("split fractions must sum to 1")


def split(series: TimeSeries, spec: SplitSpec = SplitSpec()):
    """Partition in time order: floor(n * train), floor(n * validation),
    and the remainder. All three parts must be nonempty."""
    n = series.n
    n_train = int(np.floor(n * spec.train))
    n_val = int(np.floor(n * spec.validation))
    n_test = n - n_train - n_val
    if min(n_train, n_val, n_test) < 1:
        raise ValueError(
            f"split of {n} points gives {n_train}/{n_val}/{n_test}; "
            f"every partition must be nonempty"
        )
    return (series.slice(0, n_train),
            series.slice(n_train, n_train + n_val),
            series.slice(n_train + n_val, n))
