"""Shared fixtures: deterministic simulators and the acceptance summary hook."""

from __future__ import annotations

import numpy as np
import pytest

from tsblend.numerics import RngStream
from tsblend.series import TimeSeries


# ---------------------------------------------------------------------------
# simulators
# ---------------------------------------------------------------------------

def sim_ar1(phi: float, n: int, stream: RngStream, sigma: float = 1.0,
            mean: float = 0.0) -> np.ndarray:
    rng = stream.generator()
    eps = rng.standard_normal(n + 100) * sigma
    y = np.empty(n + 100)
    y[0] = eps[0]
    for t in range(1, n + 100):
        y[t] = phi * y[t - 1] + eps[t]
    return y[100:] + mean


def sim_ma1(theta: float, n: int, stream: RngStream, sigma: float = 1.0,
            mean: float = 0.0) -> np.ndarray:
    rng = stream.generator()
    eps = rng.standard_normal(n + 1) * sigma
    return eps[1:] + theta * eps[:-1] + mean


def sim_arma11(phi: float, theta: float, n: int, stream: RngStream,
               sigma: float = 1.0) -> np.ndarray:
    rng = stream.generator()
    eps = rng.standard_normal(n + 100) * sigma
    y = np.empty(n + 100)
    y[0] = eps[0]
    for t in range(1, n + 100):
        y[t] = phi * y[t - 1] + eps[t] + theta * eps[t - 1]
    return y[100:]


def sim_ima11(theta: float, n: int, stream: RngStream, sigma: float = 1.0,
              drift: float = 0.0) -> np.ndarray:
    w = sim_ma1(theta, n - 1, stream, sigma=sigma) + drift
    return np.concatenate([[0.0], np.cumsum(w)])


def sim_random_walk(n: int, stream: RngStream, sigma: float = 1.0) -> np.ndarray:
    rng = stream.generator()
    return np.cumsum(rng.standard_normal(n) * sigma)


def sim_seasonal(n: int, stream: RngStream, m: int = 12, trend: float = 0.05,
                 amplitude: float = 5.0, sigma: float = 1.0,
                 level: float = 50.0) -> TimeSeries:
    rng = stream.generator()
    t = np.arange(n, dtype=float)
    seasonal = amplitude * np.sin(2 * np.pi * t / m) + 0.4 * amplitude * np.cos(4 * np.pi * t / m)
    y = level + trend * t + seasonal + rng.standard_normal(n) * sigma
    return TimeSeries(values=y, frequency=m)


@pytest.fixture
def base_stream() -> RngStream:
    return RngStream(seed=20260821)


# ---------------------------------------------------------------------------
# acceptance reporting
# ---------------------------------------------------------------------------

ACCEPTANCE_LOG: list[tuple[int, str, str]] = []


def record_criterion(number: int, description: str, status: str) -> None:
    ACCEPTANCE_LOG.append((number, description, status))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_LOG:
        return
    terminalreporter.section("acceptance criteria")
    for number, description, status in sorted(set(ACCEPTANCE_LOG)):
        terminalreporter.write_line(f"[criterion {number:02d}] {status}: {description}")
