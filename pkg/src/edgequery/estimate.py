"""Inference-latency estimation.

Two estimators run side by side.  The fast one is a self-adaptive weighted
mean applied on every feedback; the slow one re-fits a three-parameter
(shifted) lognormal to a sliding window of observed latencies and predicts a
blend of its mean and median.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np

from . import kernels


class UnfitError(ValueError):
    """Raised when a latency window cannot support a lognormal fit."""


@dataclass(frozen=True)
class LognormalFit:
    gamma: float
    mu: float
    sigma: float
    n: int = 0
    three_param: bool = True

    def __post_init__(self):
        if self.sigma <= 0 or self.gamma < 0:
            raise ValueError("invalid lognormal parameters")

    @property
    def mean(self) -> float:
        return self.gamma + math.exp(self.mu + 0.5 * self.sigma**2)

    @property
    def median(self) -> float:
        return self.gamma + math.exp(self.mu)


@dataclass(frozen=True)
class EstimatorConfig:
    window_capacity: int = 100
    blend_weight: float = 0.5
    refit_interval: int = 50
    initial_t: float = 0.1

    def __post_init__(self):
        if self.window_capacity < 8:
            raise ValueError("window_capacity must be >= 8")
        if not 0.0 <= self.blend_weight <= 1.0:
            raise ValueError("blend_weight must be in [0, 1]")
        if self.refit_interval < 1:
            raise ValueError("refit_interval must be >= 1")
        if self.initial_t <= 0:
            raise ValueError("initial_t must be > 0")


class LatencyWindow:
    """Ring buffer of the most recent positive latencies."""

    def __init__(self, capacity: int = 100, samples: Iterable[float] = ()):
        self.capacity = capacity
        self._buf = deque(maxlen=capacity)
        for x in samples:
            self.push(x)

    def push(self, x: float) -> None:
        if not x > 0:
            raise ValueError(f"latency samples must be > 0, got {x}")
        self._buf.append(float(x))

    def values(self) -> np.ndarray:
        return np.fromiter(self._buf, dtype=np.float64, count=len(self._buf))

    def __len__(self) -> int:
        return len(self._buf)


def update_fast(t_old: float, t_new: float) -> float:
    if t_old <= 0 or t_new <= 0:
        raise ValueError("latencies must be > 0")
    # Weights (a^2 + b^2)/(a + b)^2 on a and 2ab/(a + b)^2 on b, rewritten as
    # mean + (a - b)^3 / (2 (a + b)^2): exact when a == b, and the correction
    # pulls towards the old value whichever side the new sample lands on.
    s = t_old + t_new
    d = t_old - t_new
    return 0.5 * s + 0.5 * d * (d / s) ** 2


def log_likelihood(x: np.ndarray, gamma: float, mu: float, sigma: float) -> float:
    x = np.asarray(x, dtype=np.float64)
    if gamma >= x.min():
        return -math.inf
    y = np.log(x - gamma)
    n = len(x)
    return float(-n * math.log(math.sqrt(2 * math.pi) * sigma) - y.sum() - ((y - mu) ** 2).sum() / (2 * sigma**2))


def score_equations(x: np.ndarray, gamma: float, mu: float, sigma: float):
    """Partial derivatives of the log-likelihood in (mu, sigma, gamma)."""
    x = np.asarray(x, dtype=np.float64)
    d = x - gamma
    r = np.log(d) - mu
    n = len(x)
    d_mu = r.sum() / sigma**2
    d_sigma = -n / sigma + (r**2).sum() / sigma**3
    d_gamma = (1.0 / d).sum() + (r / d).sum() / sigma**2
    return float(d_mu), float(d_sigma), float(d_gamma)


def _closed_form(x: np.ndarray, gamma: float):
    y = np.log(x - gamma)
    mu = float(y.mean())
    sigma = float(np.sqrt(np.mean((y - mu) ** 2)))
    return mu, sigma


GRID_POINTS = 256


def _bisect(x: np.ndarray, lo: float, hi: float, rel_tol: float = 1e-10) -> float:
    g_lo = kernels.gamma_score(x, lo)[0]
    while hi - lo > rel_tol * max(abs(lo), abs(hi), 1e-300):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        g_mid = kernels.gamma_score(x, mid)[0]
        if (g_mid < 0) == (g_lo < 0):
            lo, g_lo = mid, g_mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def fit_lognormal3(window) -> LognormalFit:
    """Local maximum-likelihood fit of ``(gamma, mu, sigma)``.

    The location equation is scanned on a uniform grid over
    ``[0, min(x) * (1 - 1e-6)]``.  Every bracket where the score changes
    sign from negative to positive (profile likelihood rising, then falling)
    is bisected to a local maximum; the candidate with the highest
    log-likelihood wins.  If there is none, or the winner does not beat the
    two-parameter fit at ``gamma = 0``, the two-parameter fit is returned.
    """
    x = window.values() if isinstance(window, LatencyWindow) else np.asarray(window, dtype=np.float64)
    if len(x) < 8:
        raise UnfitError(f"need at least 8 samples, got {len(x)}")
    if not np.all(x > 0) or not np.all(np.isfinite(x)):
        raise UnfitError("samples must be positive and finite")
    if np.ptp(x) == 0:
        raise UnfitError("all samples are equal")

    mu0, sigma0 = _closed_form(x, 0.0)
    best = LognormalFit(0.0, mu0, sigma0, len(x), three_param=False)
    best_ll = log_likelihood(x, 0.0, mu0, sigma0)

    grid = np.linspace(0.0, x.min() * (1 - 1e-6), GRID_POINTS)
    g = kernels.gamma_score(x, grid)
    rising = np.flatnonzero((g[:-1] < 0) & (g[1:] >= 0))
    for i in rising:
        gamma = grid[i + 1] if g[i + 1] == 0 else _bisect(x, grid[i], grid[i + 1])
        mu, sigma = _closed_form(x, gamma)
        if not sigma > 0:
            continue
        ll = log_likelihood(x, gamma, mu, sigma)
        if ll > best_ll:
            best, best_ll = LognormalFit(float(gamma), mu, sigma, len(x)), ll
    return best


def predict(fit: LognormalFit, cfg: EstimatorConfig = EstimatorConfig()) -> float:
    w = cfg.blend_weight
    return w * fit.mean + (1.0 - w) * fit.median


class LatencyEstimator:
    """Per-device inference-time estimate fed by classifier feedback.

    Each observation updates the estimate with :func:`update_fast`; every
    ``refit_interval`` observations the window is re-fitted and the
    lognormal prediction is folded in through the same update, so the
    estimate never jumps.
    """

    def __init__(self, cfg: EstimatorConfig = EstimatorConfig()):
        self.cfg = cfg
        self.t = cfg.initial_t
        self.window = LatencyWindow(cfg.window_capacity)
        self.last_fit: Optional[LognormalFit] = None
        self._since_fit = 0

    def observe(self, latency: float) -> float:
        self.window.push(latency)
        self.t = update_fast(self.t, latency)
        self._since_fit += 1
        if self._since_fit >= self.cfg.refit_interval and len(self.window) >= 8:
            self._since_fit = 0
            try:
                self.last_fit = fit_lognormal3(self.window)
            except UnfitError:
                pass
            else:
                self.t = update_fast(self.t, predict(self.last_fit, self.cfg))
        return self.t
