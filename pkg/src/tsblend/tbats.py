"""Trigonometric-seasonal state-space model with correlated disturbances.

The transformed series is filtered through a damped linear trend plus one
rotating pair of states per seasonal harmonic; the disturbance feeding
every state is an ARMA process in the innovations. Smoothing gains, the
damping and ARMA coefficients, and optionally the power-transform
exponent are optimized by gaussian likelihood, with the seed states
profiled out exactly at every objective call (the filter is affine in
them, so a least-squares solve replaces free parameters). The exponent
enters the likelihood with its Jacobian term so fits at different
exponents are comparable.
"""

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .arima import pacf_to_ar
from .ets import _logistic, _logit
from .kernels import tbats_filter
from .numerics import FitError, nelder_mead
from .results import DEFAULT_LEVELS, ForecastResult, gaussian_forecast, innovations_sigma
from .series import BoxCoxParams, TimeSeries, box_cox, guerrero_lambda

ALPHA_BOUNDS = (1e-4, 0.9999)
TREND_GAIN_BOUNDS = (1e-4, 0.9999)
GAMMA_BOUNDS = (-0.5, 0.5)
DAMPING_BOUNDS = (0.8, 0.98)
LAMBDA_BOUNDS = (-1.0, 2.0)
# estimation searches the variance-stabilizing range for positive data;
# exponent 1 competes as its own fixed candidate, and the floor keeps the
# exponent out of denormal territory where the transform degrades (below
# it the transform is indistinguishable from the log anyway)
LAMBDA_SEARCH_BOUNDS = (1e-6, 1.0)
MAX_HARMONICS = 6


@dataclass(frozen=True)
class SeasonalBlock:
    """One seasonal period and the number of harmonic pairs modelling it."""

    m: int
    k: int

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 2:
            raise ValueError(f"period must be an integer >= 2, got {self.m}")
        object.__setattr__(self, "m", int(self.m))
        if int(self.k) != self.k or not 1 <= self.k <= self.m // 2:
            raise ValueError(
                f"harmonic count must lie in 1..{self.m // 2} for period "
                f"{self.m}, got {self.k}"
            )
        object.__setattr__(self, "k", int(self.k))


@dataclass(frozen=True)
class TbatsSpec:
    """Model skeleton: transform exponent, ARMA orders, damping, blocks.

    lam is a fixed exponent, or None to estimate it inside the
    likelihood. damped=False pins the trend multiplier at 1.
    shared_trend_gain=True reuses the level gain on the trend equation
    (the strict printed recursion); the default estimates an independent
    trend gain.
    """

    lam: Optional[float] = None
    p: int = 0
    q: int = 0
    damped: bool = False
    blocks: tuple = ()
    shared_trend_gain: bool = False

    def __post_init__(self):
        if self.lam is not None:
            lam = float(self.lam)
            if not np.isfinite(lam) or not (LAMBDA_BOUNDS[0] <= lam <= LAMBDA_BOUNDS[1]):
                raise ValueError(
                    f"exponent must lie in [{LAMBDA_BOUNDS[0]}, "
                    f"{LAMBDA_BOUNDS[1]}], got {self.lam}"
                )
            object.__setattr__(self, "lam", lam)
        for name in ("p", "q"):
            v = getattr(self, name)
            if int(v) != v or v < 0:
                raise ValueError(f"{name} must be a non-negative integer, got {v}")
            object.__setattr__(self, name, int(v))
        blocks = tuple(self.blocks)
        for b in blocks:
            if not isinstance(b, SeasonalBlock):
                raise ValueError("blocks must be SeasonalBlock instances")
        if len(blocks) > 2:
            raise ValueError("at most two seasonal blocks are supported")
        if len({b.m for b in blocks}) != len(blocks):
            raise ValueError("seasonal block periods must be distinct")
        object.__setattr__(self, "blocks", blocks)

    @property
    def n_harmonics(self) -> int:
        return sum(b.k for b in self.blocks)


def _split_top(text: str) -> list[str]:
    """Split on commas outside every brace or angle-bracket group."""
    parts, depth, cur = [], 0, []
    for ch in text:
        if ch in "{<":
            depth += 1
        elif ch in "}>":
            depth -= 1
            if depth < 0:
                raise ValueError(f"unbalanced brackets in {text!r}")
        if ch == "," and depth == 0:
            parts.append("".join(cur))
            cur = []
        else:
            cur.append(ch)
    if depth != 0:
        raise ValueError(f"unbalanced brackets in {text!r}")
    parts.append("".join(cur))
    return parts


def parse_tbats_spec(text: str) -> TbatsSpec:
    """Read the compact spec syntax "lam,{p,q},phi,{<m,k>,...}".

    The exponent field takes a number or "auto"; the damping field takes
    "-" for none, or "auto" / a number for a damped trend (printed
    damping values are estimates, so the number itself is not pinned);
    the seasonal field takes "-" for no blocks.
    """
    s = text.strip()
    if s.upper().startswith("TBATS(") and s.endswith(")"):
        s = s[6:-1]
    fields = [f.strip() for f in _split_top(s)]
    if len(fields) != 4:
        raise ValueError(
            f"expected 4 comma-separated fields "
            f"(exponent, {{p,q}}, damping, blocks), got {len(fields)} in {text!r}"
        )
    lam_text, arma_text, phi_text, seas_text = fields

    if lam_text.lower() == "auto":
        lam = None
    else:
        try:
            lam = float(lam_text)
        except ValueError:
            raise ValueError(f"cannot parse exponent field {lam_text!r}") from None

    if not (arma_text.startswith("{") and arma_text.endswith("}")):
        raise ValueError(f"arma field must look like {{p,q}}, got {arma_text!r}")
    arma_parts = arma_text[1:-1].split(",")
    if len(arma_parts) != 2:
        raise ValueError(f"arma field must hold two orders, got {arma_text!r}")
    try:
        p, q = int(arma_parts[0]), int(arma_parts[1])
    except ValueError:
        raise ValueError(f"cannot parse arma orders in {arma_text!r}") from None

    if phi_text == "-":
        damped = False
    elif phi_text.lower() == "auto":
        damped = True
    else:
        try:
            float(phi_text)
        except ValueError:
            raise ValueError(f"cannot parse damping field {phi_text!r}") from None
        damped = True

    blocks = []
    if seas_text not in ("-", "{}", "{-}"):
        if not (seas_text.startswith("{") and seas_text.endswith("}")):
            raise ValueError(
                f"seasonal field must look like {{<m,k>,...}}, got {seas_text!r}"
            )
        for item in _split_top(seas_text[1:-1]):
            item = item.strip()
            if not (item.startswith("<") and item.endswith(">")):
                raise ValueError(f"seasonal block must look like <m,k>, got {item!r}")
            nums = item[1:-1].split(",")
            if len(nums) != 2:
                raise ValueError(f"seasonal block must hold two numbers, got {item!r}")
            try:
                blocks.append(SeasonalBlock(m=int(nums[0]), k=int(nums[1])))
            except ValueError as err:
                raise ValueError(f"bad seasonal block {item!r}: {err}") from None
    return TbatsSpec(lam=lam, p=p, q=q, damped=damped, blocks=tuple(blocks))


def _fmt(v: float) -> str:
    out = f"{float(v):.5g}"
    return "0" if out == "-0" else out


def format_tbats_spec(spec: TbatsSpec, lam: Optional[float] = None,
                      phi: Optional[float] = None, sep: str = ",") -> str:
    """Render the compact spec syntax; fitted values fill the estimated
    exponent and damping slots when provided."""
    if spec.lam is not None:
        lam_text = _fmt(spec.lam)
    else:
        lam_text = _fmt(lam) if lam is not None else "auto"
    if not spec.damped:
        phi_text = "-"
    else:
        phi_text = _fmt(phi) if phi is not None else "auto"
    if spec.blocks:
        seas_text = "{" + ",".join(f"<{b.m},{b.k}>" for b in spec.blocks) + "}"
    else:
        seas_text = "-"
    return sep.join([lam_text, "{" + f"{spec.p},{spec.q}" + "}", phi_text, seas_text])


def _expand_blocks(blocks):
    """Flatten per-block harmonics into per-harmonic rotation and gain maps."""
    cosw, sinw, owner = [], [], []
    for i, b in enumerate(blocks):
        for j in range(1, b.k + 1):
            w = 2.0 * math.pi * j / b.m
            cosw.append(math.cos(w))
            sinw.append(math.sin(w))
            owner.append(i)
    return (np.array(cosw), np.array(sinw), np.array(owner, dtype=int))


@dataclass(frozen=True)
class TbatsFit:
    """Estimated gains, coefficients, states, and fit summary."""

    spec: TbatsSpec
    transform: BoxCoxParams
    alpha: float
    beta: float
    phi: float
    gamma1: np.ndarray
    gamma2: np.ndarray
    ar: np.ndarray
    ma: np.ndarray
    level0: float
    trend0: float
    seasonal0: np.ndarray
    seasonal0_star: np.ndarray
    level: float
    trend: float
    s: np.ndarray
    ss: np.ndarray
    dlag: np.ndarray
    elag: np.ndarray
    residuals: np.ndarray
    fitted: np.ndarray
    sigma2: float
    loglik: float
    aicc: float
    k: int
    n: int
    y: np.ndarray
    converged: bool = True

    @property
    def state_dim(self) -> int:
        """Filter state length: level, trend, harmonic pairs, arma carry."""
        return 2 + 2 * self.spec.n_harmonics + self.spec.p + self.spec.q

    def label(self) -> str:
        return "TBATS(" + format_tbats_spec(
            self.spec, lam=self.transform.lam,
            phi=self.phi if self.spec.damped else None, sep=", ") + ")"


def _decode(raw, spec: TbatsSpec, nh, owner):
    """Raw optimizer vector to model quantities; returns the index walked."""
    i = 0
    if spec.lam is None:
        lam = _logistic(raw[i], *LAMBDA_SEARCH_BOUNDS)
        i += 1
    else:
        lam = spec.lam
    alpha = _logistic(raw[i], *ALPHA_BOUNDS)
    i += 1
    if spec.shared_trend_gain:
        beta = alpha
    else:
        beta = _logistic(raw[i], *TREND_GAIN_BOUNDS)
        i += 1
    if spec.damped:
        phi = _logistic(raw[i], *DAMPING_BOUNDS)
        i += 1
    else:
        phi = 1.0
    gamma1 = np.zeros(len(spec.blocks))
    gamma2 = np.zeros(len(spec.blocks))
    for b in range(len(spec.blocks)):
        gamma1[b] = _logistic(raw[i], *GAMMA_BOUNDS)
        gamma2[b] = _logistic(raw[i + 1], *GAMMA_BOUNDS)
        i += 2
    g1 = gamma1[owner] if nh else np.zeros(0)
    g2 = gamma2[owner] if nh else np.zeros(0)
    ar = pacf_to_ar(np.tanh(raw[i:i + spec.p])) if spec.p else np.zeros(0)
    i += spec.p
    ma = -pacf_to_ar(np.tanh(raw[i:i + spec.q])) if spec.q else np.zeros(0)
    i += spec.q
    return lam, alpha, beta, phi, gamma1, gamma2, g1, g2, ar, ma


def _profiled_sse(yl, alpha, beta, phi, g1, g2, cosw, sinw, ar, ma):
    """Exact minimum of the innovation SSE over the seed states.

    The filter is affine in (level, trend, harmonic seeds), so the
    residual of any seed vector is base - design @ seeds with columns
    read off unit-seed runs; least squares gives the profile optimum.
    """
    nh = cosw.size
    dim = 2 + 2 * nh
    zero_s = np.zeros(nh)
    base = tbats_filter(yl, alpha, beta, phi, g1, g2, cosw, sinw, ar, ma,
                        0.0, 0.0, zero_s, zero_s)[0]
    if not np.all(np.isfinite(base)):
        return np.inf, np.zeros(dim)
    n = yl.size
    design = np.empty((n, dim))
    for i in range(dim):
        seed = np.zeros(dim)
        seed[i] = 1.0
        eps = tbats_filter(yl, alpha, beta, phi, g1, g2, cosw, sinw, ar, ma,
                           seed[0], seed[1], seed[2:2 + nh].copy(),
                           seed[2 + nh:].copy())[0]
        design[:, i] = base - eps
    if not np.all(np.isfinite(design)):
        return np.inf, np.zeros(dim)
    try:
        seeds, *_ = np.linalg.lstsq(design, base, rcond=None)
    except np.linalg.LinAlgError:
        return np.inf, np.zeros(dim)
    resid = base - design @ seeds
    return float(resid @ resid), seeds


def _fit_one(series: TimeSeries, spec: TbatsSpec,
             tolerance: float = 1e-6) -> TbatsFit:
    """Likelihood fit of one spec; seed states profiled at every call."""
    y = series.values
    n = y.size
    min_n = 2 * max((b.m for b in spec.blocks), default=0) + 8
    if n < min_n:
        raise ValueError(f"need at least {min_n} observations, got {n}")
    for b in spec.blocks:
        if b.m > n // 2:
            raise ValueError(f"period {b.m} too long for {n} observations")

    cosw, sinw, owner = _expand_blocks(spec.blocks)
    nh = cosw.size
    shift = float(abs(y.min()) + 1.0) if y.min() <= 0 else 0.0
    logsum = float(np.sum(np.log(y + shift)))

    fixed_yl = None
    if spec.lam is not None:
        fixed_yl = box_cox(y, BoxCoxParams(lam=spec.lam, shift=shift))

    def objective(raw):
        lam, alpha, beta, phi, _, _, g1, g2, ar, ma = _decode(
            raw, spec, nh, owner)
        if not _stable(alpha, beta, phi, g1, g2, cosw, sinw, ar, ma):
            return np.inf
        if fixed_yl is not None:
            yl = fixed_yl
        else:
            yl = box_cox(y, BoxCoxParams(lam=lam, shift=shift))
        sse, _ = _profiled_sse(yl, alpha, beta, phi, g1, g2, cosw, sinw,
                               ar, ma)
        if not np.isfinite(sse):
            return np.inf
        return n * math.log(max(sse, 1e-290) / n) - 2.0 * (lam - 1.0) * logsum

    def start(alpha, beta, phi=0.95, coef=0.1):
        raw = []
        if spec.lam is None:
            seed_lam = min(max(guerrero_lambda(series).lam, 0.02), 0.98)
            raw.append(_logit(seed_lam, *LAMBDA_SEARCH_BOUNDS))
        raw.append(_logit(alpha, *ALPHA_BOUNDS))
        if not spec.shared_trend_gain:
            raw.append(_logit(beta, *TREND_GAIN_BOUNDS))
        if spec.damped:
            raw.append(_logit(phi, *DAMPING_BOUNDS))
        raw.extend([0.0, 0.0] * len(spec.blocks))
        raw.extend([coef] * (spec.p + spec.q))
        return np.array(raw)

    # the gain surface has corner-trap local minima; race a smooth-series
    # start against a reactive one and polish the winner
    result = None
    for raw0 in (start(0.05, 0.01), start(0.4, 0.05)):
        run = nelder_mead(objective, raw0, tolerance=tolerance)
        if result is None or run.fun < result.fun:
            result = run
    polish = nelder_mead(objective, result.x, tolerance=tolerance)
    if polish.fun <= result.fun:
        result = polish
    if not result.converged:
        raise FitError(
            f"optimizer failed to converge for {format_tbats_spec(spec)}",
            diagnostics={"spec": format_tbats_spec(spec),
                         "iterations": result.iterations,
                         "objective": result.fun},
        )

    lam, alpha, beta, phi, gamma1, gamma2, g1, g2, ar, ma = _decode(
        result.x, spec, nh, owner)
    params = BoxCoxParams(lam=lam, shift=shift)
    yl = fixed_yl if fixed_yl is not None else box_cox(y, params)
    sse, seeds = _profiled_sse(yl, alpha, beta, phi, g1, g2, cosw, sinw,
                               ar, ma)
    eps, fitted, lev, b, s, ss, dlag, elag = tbats_filter(
        yl, alpha, beta, phi, g1, g2, cosw, sinw, ar, ma,
        seeds[0], seeds[1], seeds[2:2 + nh].copy(), seeds[2 + nh:].copy())
    sigma2 = max(sse, 1e-290) / n
    loglik = -0.5 * (n * math.log(sigma2) + n * (1.0 + math.log(2.0 * math.pi))
                     - 2.0 * (lam - 1.0) * logsum)
    k = result.x.size + (2 + 2 * nh) + 1
    aic = -2.0 * loglik + 2.0 * k
    denom = n - k - 1.0
    aicc = aic + 2.0 * k * (k + 1.0) / denom if denom > 0 else np.inf
    return TbatsFit(
        spec=spec, transform=params, alpha=alpha, beta=beta, phi=phi,
        gamma1=gamma1, gamma2=gamma2, ar=ar, ma=ma,
        level0=float(seeds[0]), trend0=float(seeds[1]),
        seasonal0=seeds[2:2 + nh].copy(),
        seasonal0_star=seeds[2 + nh:].copy(),
        level=float(lev), trend=float(b), s=s, ss=ss, dlag=dlag, elag=elag,
        residuals=eps, fitted=fitted, sigma2=float(sigma2),
        loglik=float(loglik), aicc=float(aicc), k=int(k), n=n, y=y.copy(),
        converged=result.converged,
    )


def fit_tbats(series: TimeSeries, candidates=None, tolerance: float = 1e-6):
    """Fit the best trigonometric state-space model by AICc.

    With an explicit candidate list every spec is fit and the minimum
    AICc wins. Auto mode searches in stages: exponent in {1, estimated}
    crossed with the harmonic count 1..min(6, m/2) first, then damping
    on the winner, then ARMA orders (1,0), (0,1), (1,1) on the winner.
    Returns (spec, fit); raises when every candidate fails.
    """
    failures = []
    best: Optional[TbatsFit] = None

    def consider(spec):
        nonlocal best
        try:
            fit = _fit_one(series, spec, tolerance=tolerance)
        except (ValueError, FitError) as err:
            failures.append((format_tbats_spec(spec), str(err)))
            return
        if best is None or fit.aicc < best.aicc:
            best = fit

    if candidates is not None:
        specs = list(candidates)
        if not specs:
            raise ValueError("candidate list is empty")
        for spec in specs:
            consider(spec)
    else:
        m = series.frequency
        seasonal_ok = m >= 2 and series.n >= 2 * m + 8
        kmax = min(MAX_HARMONICS, m // 2) if seasonal_ok else 0
        for lam in (1.0, None):
            if kmax == 0:
                consider(TbatsSpec(lam=lam))
            else:
                for kh in range(1, kmax + 1):
                    consider(TbatsSpec(
                        lam=lam, blocks=(SeasonalBlock(m=m, k=kh),)))
        if best is not None:
            base = best.spec
            consider(TbatsSpec(lam=base.lam, damped=True, blocks=base.blocks))
            base = best.spec
            for p, q in ((1, 0), (0, 1), (1, 1)):
                consider(TbatsSpec(lam=base.lam, p=p, q=q,
                                   damped=base.damped, blocks=base.blocks))
    if best is None:
        raise FitError(
            "every candidate specification failed to fit",
            diagnostics={"failures": failures},
        )
    return best.spec, best


def _matrices(alpha, beta, phi, g1, g2, cosw, sinw, ar, ma):
    """Transition F, innovation loading g, measurement w of the filter.

    State order: level, trend, harmonic s block, harmonic s* block,
    disturbance lags, innovation lags. The measurement acts on the
    previous state.
    """
    nh = cosw.size
    p, q = ar.size, ma.size
    ns = 2 + 2 * nh + p + q
    i_d = 2 + 2 * nh
    i_e = i_d + p

    w_d = np.zeros(ns)
    w_d[i_d:i_d + p] = ar
    w_d[i_e:i_e + q] = ma

    gains = np.zeros(ns)
    gains[0] = alpha
    gains[1] = beta
    if nh:
        gains[2:2 + nh] = g1
        gains[2 + nh:2 + 2 * nh] = g2

    F = np.zeros((ns, ns))
    F[0, 0] = 1.0
    F[0, 1] = phi
    F[1, 1] = phi
    for j in range(nh):
        F[2 + j, 2 + j] = cosw[j]
        F[2 + j, 2 + nh + j] = sinw[j]
        F[2 + nh + j, 2 + j] = -sinw[j]
        F[2 + nh + j, 2 + nh + j] = cosw[j]
    F += gains[:, None] * w_d[None, :]
    if p:
        F[i_d, :] = w_d  # the new disturbance value
        for i in range(1, p):
            F[i_d + i, :] = 0.0
            F[i_d + i, i_d + i - 1] = 1.0
    if q:
        F[i_e, :] = 0.0  # the new innovation enters through g only
        for j in range(1, q):
            F[i_e + j, :] = 0.0
            F[i_e + j, i_e + j - 1] = 1.0

    g = gains.copy()
    if p:
        g[i_d] = 1.0
    if q:
        g[i_e] = 1.0

    w = np.zeros(ns)
    w[0] = 1.0
    w[1] = phi
    w[2:2 + nh] = 1.0
    w += w_d
    return F, g, w


def _stable(alpha, beta, phi, g1, g2, cosw, sinw, ar, ma) -> bool:
    """Admissibility: the filter F - g w' must not amplify old states.

    Outside the unit circle the filter is explosive and profiled seeds can
    quasi-interpolate the sample, faking near-zero innovation variance.
    The boundary itself stays admissible (zero gains leave deterministic
    components with unit modulus).
    """
    F, g, w = _matrices(alpha, beta, phi, g1, g2, cosw, sinw, ar, ma)
    eig = np.linalg.eigvals(F - np.outer(g, w))
    return bool(np.max(np.abs(eig)) <= 1.0 + 1e-8)


def _state_matrices(fit: TbatsFit):
    cosw, sinw, owner = _expand_blocks(fit.spec.blocks)
    g1 = fit.gamma1[owner] if cosw.size else np.zeros(0)
    g2 = fit.gamma2[owner] if cosw.size else np.zeros(0)
    return _matrices(fit.alpha, fit.beta, fit.phi, g1, g2, cosw, sinw,
                     fit.ar, fit.ma)


def _terminal_state(fit: TbatsFit) -> np.ndarray:
    return np.concatenate([[fit.level, fit.trend], fit.s, fit.ss,
                           fit.dlag, fit.elag])


def forecast_tbats(fit: TbatsFit, h: int,
                   levels=DEFAULT_LEVELS) -> ForecastResult:
    """Iterate the filter with zero innovations for the mean path;
    standard errors accumulate the linear impulse response."""
    if h < 1:
        raise ValueError(f"horizon must be at least 1, got {h}")
    F, g, w = _state_matrices(fit)
    x = _terminal_state(fit)
    mean = np.empty(h)
    for i in range(h):
        mean[i] = w @ x
        x = F @ x
    sigma = innovations_sigma(F, g, w, fit.sigma2, h)
    return gaussian_forecast(mean, sigma, levels=levels,
                             transform=fit.transform)
