"""Shared numerical kernels: optimization, least squares, projections,
distribution tails, and reproducible random streams.

Everything downstream (model fitting, tests, intervals) goes through this
module so the numeric conventions stay in one place.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import linalg as _linalg
from scipy import optimize as _optimize
from scipy import special as _special


class FitError(RuntimeError):
    """Model estimation failed; carries best-so-far diagnostics."""

    def __init__(self, message: str, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics


# ---------------------------------------------------------------------------
# derivative-free minimization
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class OptimResult:
    """Outcome of a simplex minimization."""

    x: np.ndarray
    fun: float
    iterations: int
    converged: bool


def nelder_mead(
    objective: Callable[[np.ndarray], float],
    x0: Sequence[float],
    tolerance: float = 1e-8,
    max_iter: Optional[int] = None,
    restart: bool = True,
) -> OptimResult:
    """Minimize a scalar objective with the Nelder-Mead simplex method.

    Uses the classic coefficients (reflection 1, expansion 2, contraction
    0.5, shrink 0.5). Convergence means the simplex has collapsed below
    `tolerance` in every coordinate. One restart from the best vertex is
    attempted when the iteration budget runs out short of convergence.
    Objective values that are not finite are treated as +inf so the search
    backs away instead of aborting.
    """
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    if x0.ndim != 1:
        raise ValueError("x0 must be one-dimensional")
    f0 = float(objective(x0))
    if not np.isfinite(f0):
        raise ValueError("objective is not finite at the starting point")

    def safe(x: np.ndarray) -> float:
        v = float(objective(x))
        return v if np.isfinite(v) else np.inf

    budget = int(max_iter) if max_iter is not None else 400 * max(x0.size, 1)
    opts = dict(xatol=tolerance, fatol=np.inf, maxiter=budget, maxfev=4 * budget)
    res = _optimize.minimize(safe, x0, method="Nelder-Mead", options=opts)
    iterations = int(res.nit)
    if not res.success and restart:
        res2 = _optimize.minimize(safe, res.x, method="Nelder-Mead", options=opts)
        iterations += int(res2.nit)
        if res2.fun <= res.fun:
            res = res2
    return OptimResult(
        x=np.asarray(res.x, dtype=float),
        fun=float(res.fun),
        iterations=iterations,
        converged=bool(res.success),
    )


# ---------------------------------------------------------------------------
# linear least squares
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class OlsResult:
    """Least-squares fit with the pieces the callers actually use."""

    coef: np.ndarray
    fitted: np.ndarray
    residuals: np.ndarray
    stderr: np.ndarray
    sigma2: float
    rank: int


def ols(design: np.ndarray, response: np.ndarray) -> OlsResult:
    """Solve min ||y - X b|| by QR with column pivoting.

    Raises on rank deficiency, naming the offending column, so silent
    collinearity never leaks into model coefficients.
    """
    X = np.asarray(design, dtype=float)
    y = np.asarray(response, dtype=float)
    if X.ndim != 2:
        raise ValueError("design matrix must be two-dimensional")
    n, k = X.shape
    if y.shape != (n,):
        raise ValueError(f"response length {y.shape} does not match design rows {n}")
    if n < k:
        raise ValueError(f"need at least as many rows ({n}) as columns ({k})")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise ValueError("design and response must be finite")

    Q, R, piv = _linalg.qr(X, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    scale = diag[0] if diag.size and diag[0] > 0 else 0.0
    tol = scale * max(n, k) * np.finfo(float).eps
    rank = int(np.sum(diag > tol))
    if rank < k:
        raise ValueError(
            f"design matrix is rank deficient: column {piv[rank]} is linearly "
            f"dependent on the preceding columns"
        )

    z = _linalg.solve_triangular(R, Q.T @ y)
    coef = np.empty(k)
    coef[piv] = z
    fitted = X @ coef
    resid = y - fitted
    sigma2 = float(resid @ resid) / (n - k) if n > k else 0.0
    r_inv = _linalg.solve_triangular(R, np.eye(k))
    cov_piv = r_inv @ r_inv.T
    cov = np.empty((k, k))
    cov[np.ix_(piv, piv)] = cov_piv
    stderr = np.sqrt(np.clip(np.diag(cov), 0.0, None) * sigma2)
    return OlsResult(coef=coef, fitted=fitted, residuals=resid,
                     stderr=stderr, sigma2=sigma2, rank=rank)


# ---------------------------------------------------------------------------
# simplex projection
# ---------------------------------------------------------------------------

def project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection of a vector onto the probability simplex.

    Sort-based algorithm: the projection is w_i = max(v_i - tau, 0) with tau
    chosen so the result sums to one.
    """
    v = np.asarray(v, dtype=float)
    if v.ndim != 1 or v.size == 0:
        raise ValueError("input must be a nonempty vector")
    if not np.all(np.isfinite(v)):
        raise ValueError("input must be finite")
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    ks = np.arange(1, v.size + 1)
    mask = u > css / ks
    rho = int(np.nonzero(mask)[0][-1]) + 1
    tau = css[rho - 1] / rho
    return np.maximum(v - tau, 0.0)


# ---------------------------------------------------------------------------
# distribution tails and quantiles
# ---------------------------------------------------------------------------

def chi2_sf(x: float, df: float) -> float:
    """Upper tail P(X > x) for a chi-squared variable with df degrees."""
    if df <= 0:
        raise ValueError("degrees of freedom must be positive")
    if x < 0:
        return 1.0
    return float(_special.gammaincc(df / 2.0, x / 2.0))


def normal_sf(z: float) -> float:
    """Upper tail P(Z > z) for the standard normal."""
    return float(_special.ndtr(-np.asarray(z, dtype=float)))


def t_sf(x: float, df: float) -> float:
    """Upper tail P(T > x) for Student's t with df degrees."""
    if df <= 0:
        raise ValueError("degrees of freedom must be positive")
    return float(_special.stdtr(df, -float(x)))


def normal_quantile(p: float) -> float:
    """Inverse standard-normal CDF."""
    if not 0.0 < p < 1.0:
        raise ValueError("p must lie strictly between 0 and 1")
    return float(_special.ndtri(p))


# ---------------------------------------------------------------------------
# reproducible random streams
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RngStream:
    """Deterministic, splittable random stream.

    A stream is identified by (seed, path). `generator()` always returns a
    generator positioned at the start of the stream, so the same stream
    yields the same draws no matter how many times it is opened. Substreams
    derived with different indices are statistically independent.
    """

    seed: int
    path: tuple[int, ...] = field(default=())

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=self.path)
        return np.random.Generator(np.random.PCG64(ss))

    def substream(self, *indices: int) -> "RngStream":
        return RngStream(seed=self.seed, path=self.path + tuple(int(i) for i in indices))
