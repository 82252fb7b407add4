"""Sequential filtering loops shared by the model-fitting modules.

These recursions are inherently order-dependent, so they are written as
straight loops and compiled with numba when it is importable. The pure-Python
definitions are kept as fallbacks; both paths compute identical values.
"""

from __future__ import annotations

import numpy as np

try:
    from numba import njit as _njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    HAVE_NUMBA = False

    def _njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]

        def wrap(fn):
            return fn

        return wrap


def _arma_kalman_py(w, ar, ma):
    """Innovations and their scaled variances for a zero-mean ARMA series.

    State-space form with state dimension r = max(p, q+1): transition has the
    AR coefficients down the first column and an identity superdiagonal, the
    disturbance loading is (1, ma...). The innovation variance is computed
    with the disturbance variance concentrated to one; the caller recovers
    the likelihood from (v, F). Returns ok=False if a predicted variance
    stops being positive, which signals a numerically hopeless parameter
    point to the optimizer.
    """
    p = ar.shape[0]
    q = ma.shape[0]
    n = w.shape[0]
    r = max(p, q + 1)

    # component 0 carries the observation: a_next[i] = ar[i] * a[0] + a[i+1]
    Tt = np.zeros((r, r))
    for i in range(p):
        Tt[i, 0] = ar[i]
    for i in range(r - 1):
        Tt[i, i + 1] = 1.0

    R = np.zeros(r)
    R[0] = 1.0
    for j in range(q):
        R[j + 1] = ma[j]
    RR = np.outer(R, R)

    # stationary covariance: solve (I - T (x) T) vec(P) = vec(R R')
    r2 = r * r
    M = np.zeros((r2, r2))
    for i in range(r):
        for j in range(r):
            for k in range(r):
                for l in range(r):
                    M[i * r + j, k * r + l] = -Tt[i, k] * Tt[j, l]
            M[i * r + j, i * r + j] += 1.0
    P = np.linalg.solve(M, RR.reshape(r2)).reshape((r, r))
    P = 0.5 * (P + P.T)

    phi = np.zeros(r)
    for i in range(p):
        phi[i] = ar[i]
    a = np.zeros(r)
    anew = np.zeros(r)
    K = np.zeros(r)
    M = np.zeros((r, r))
    Pn = np.zeros((r, r))
    v = np.empty(n)
    F = np.empty(n)
    ok = True
    # all matrix products are unrolled against the sparse transition
    # (AR column plus superdiagonal) to keep the loop body scalar
    for t in range(n):
        f = P[0, 0]
        if not f > 0.0:
            ok = False
            f = 1.0
        vt = w[t] - a[0]
        v[t] = vt
        F[t] = f
        for i in range(r):
            nxt = P[i + 1, 0] if i + 1 < r else 0.0
            M[i, 0] = phi[i] * P[0, 0] + nxt
            for j in range(1, r):
                nxt = P[i + 1, j] if i + 1 < r else 0.0
                M[i, j] = phi[i] * P[0, j] + nxt
        for i in range(r):
            K[i] = M[i, 0] / f
            ai1 = a[i + 1] if i + 1 < r else 0.0
            anew[i] = phi[i] * a[0] + ai1 + K[i] * vt
        for i in range(r):
            for j in range(r):
                mij1 = M[i, j + 1] if j + 1 < r else 0.0
                Pn[i, j] = phi[j] * M[i, 0] + mij1 - K[i] * K[j] * f + RR[i, j]
        for i in range(r):
            a[i] = anew[i]
            for j in range(r):
                P[i, j] = 0.5 * (Pn[i, j] + Pn[j, i])
    return v, F, ok


def _css_residuals_py(w, ar, ma, ncond):
    """Conditional-sum-of-squares recursion for a zero-mean ARMA series.

    Residuals for t < ncond are pinned at zero; later ones use the observed
    lags and previously computed residuals.
    """
    p = ar.shape[0]
    q = ma.shape[0]
    n = w.shape[0]
    e = np.zeros(n)
    for t in range(ncond, n):
        acc = w[t]
        for i in range(p):
            acc -= ar[i] * w[t - 1 - i]
        for j in range(q):
            k = t - 1 - j
            if k >= 0:
                acc -= ma[j] * e[k]
        e[t] = acc
    return e


def _ets_filter_py(y, m, trend_mode, seasonal_on, alpha, beta_star, gamma, phi,
                   level0, trend0, seas0):
    """One pass of the additive-error smoothing recursion.

    trend_mode: 0 none, 1 additive, 2 additive damped (phi applies).
    Seasonal states are renormalized to sum to zero at every step; the
    offset moves into the level, which leaves every prediction unchanged.
    Returns (residuals, fitted, final level, final trend, final seasonals).
    """
    n = y.shape[0]
    e = np.empty(n)
    fit = np.empty(n)
    s = seas0.copy()
    lev = level0
    b = trend0
    for t in range(n):
        if trend_mode == 2:
            bph = phi * b
        elif trend_mode == 1:
            bph = b
        else:
            bph = 0.0
        pos = t % m
        sc = s[pos] if seasonal_on else 0.0
        yhat = lev + bph + sc
        err = y[t] - yhat
        fit[t] = yhat
        e[t] = err
        lev = lev + bph + alpha * err
        if trend_mode != 0:
            b = bph + alpha * beta_star * err
        if seasonal_on:
            s[pos] = s[pos] + gamma * err
            off = 0.0
            for j in range(m):
                off += s[j]
            off /= m
            for j in range(m):
                s[j] -= off
            lev += off
    return e, fit, lev, b, s


def _tbats_filter_py(yl, alpha, beta, phi, g1, g2, cosw, sinw, ar, ma,
                     level0, trend0, s0, ss0):
    """Filter a transformed series through the trigonometric state-space
    recursion with ARMA-correlated disturbances.

    g1/g2/cosw/sinw are flattened per-harmonic arrays. Returns the
    innovation sequence, one-step predictions, and the terminal state
    (level, trend, harmonic states, disturbance and innovation lags).
    """
    n = yl.shape[0]
    nh = cosw.shape[0]
    p = ar.shape[0]
    q = ma.shape[0]
    eps = np.empty(n)
    fit = np.empty(n)
    s = s0.copy()
    ss = ss0.copy()
    dlag = np.zeros(p)
    elag = np.zeros(q)
    lev = level0
    b = trend0
    for t in range(n):
        dhat = 0.0
        for i in range(p):
            dhat += ar[i] * dlag[i]
        for j in range(q):
            dhat += ma[j] * elag[j]
        seas = 0.0
        for k in range(nh):
            seas += s[k]
        yhat = lev + phi * b + seas + dhat
        err = yl[t] - yhat
        d = dhat + err
        eps[t] = err
        fit[t] = yhat
        newlev = lev + phi * b + alpha * d
        b = phi * b + beta * d
        lev = newlev
        for k in range(nh):
            sk = s[k]
            ssk = ss[k]
            s[k] = sk * cosw[k] + ssk * sinw[k] + g1[k] * d
            ss[k] = -sk * sinw[k] + ssk * cosw[k] + g2[k] * d
        for i in range(p - 1, 0, -1):
            dlag[i] = dlag[i - 1]
        if p > 0:
            dlag[0] = d
        for j in range(q - 1, 0, -1):
            elag[j] = elag[j - 1]
        if q > 0:
            elag[0] = err
    return eps, fit, lev, b, s, ss, dlag, elag


arma_kalman = _njit(cache=True)(_arma_kalman_py) if HAVE_NUMBA else _arma_kalman_py
css_residuals = _njit(cache=True)(_css_residuals_py) if HAVE_NUMBA else _css_residuals_py
ets_filter = _njit(cache=True)(_ets_filter_py) if HAVE_NUMBA else _ets_filter_py
tbats_filter = _njit(cache=True)(_tbats_filter_py) if HAVE_NUMBA else _tbats_filter_py
