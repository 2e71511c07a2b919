"""Gaussian measurement noise N(0, (sigma^2/m) I) and its tail / density-shift constants.

Formulas always use the nominal m; the sampled dimension is the realized
row count q of the operator (equal to m for dense operators).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .numerics import as_generator


@dataclass(frozen=True)
class NoiseSpec:
    sigma: float
    m_nominal: int

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        if self.m_nominal < 1:
            raise ValueError("m_nominal must be >= 1")

    @property
    def variance(self) -> float:
        """Per-coordinate variance sigma^2 / m."""
        return self.sigma**2 / self.m_nominal

    @property
    def precision_factor(self) -> float:
        """m / sigma^2, the coefficient of the squared residual in the log-likelihood."""
        return self.m_nominal / self.sigma**2


_LOG_MAX = math.log(np.finfo(float).max)


def draw_noise(spec: NoiseSpec, q: int, stream) -> np.ndarray:
    if q < 1:
        raise ValueError("q must be >= 1")
    return math.sqrt(spec.variance) * as_generator(stream).standard_normal(q)


def d_upp(spec: NoiseSpec, t: float) -> float:
    """Chernoff bound on P(||e|| >= t); returns 1 for t <= sigma where the bound is not claimed."""
    if t <= spec.sigma:
        return 1.0
    z = (t / spec.sigma) ** 2
    return math.exp(0.5 * spec.m_nominal * (math.log(z) + 1.0 - z))


def d_shift(spec: NoiseSpec, eps: float, tau: float) -> float:
    """Worst density ratio p(u)/p(v) over ||u|| <= tau, ||u - v|| <= eps (inf when it overflows)."""
    if eps < 0 or tau < 0:
        raise ValueError("eps and tau must be nonnegative")
    exponent = spec.m_nominal * (2.0 * tau + eps) * eps / (2.0 * spec.sigma**2)
    return math.exp(exponent) if exponent < _LOG_MAX else math.inf


def log_density(spec: NoiseSpec, e) -> float:
    """Log-density of N(0, (sigma^2/m) I_q) at e, with q = len(e)."""
    e = np.atleast_1d(np.asarray(e, dtype=float))
    q = e.shape[-1]
    return float(-0.5 * q * math.log(2.0 * math.pi * spec.variance) - 0.5 * np.sum(e**2) / spec.variance)
