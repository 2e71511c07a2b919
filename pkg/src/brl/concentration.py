"""Concentration constants C_low, C_upp, C_abs of a random forward operator.

Gaussian operators get exact chi-square values, subsampled orthogonal
operators a Bernstein bound, and everything else a Monte Carlo estimate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .numerics import RandomStream, as_generator, basis_transform, chi_square_cdf, chi_square_sf
from .operators import OperatorSpec, SubsampledOrthogonal, draw_operator

SIDES = ("low", "upp")
_ZERO_NORM = 1e-12


@dataclass(frozen=True)
class ConcentrationEstimate:
    t: float
    value: float
    kind: str  # exact | analytic_bound | monte_carlo
    n_x: int = 0
    n_A: int = 0
    std_err: float = 0.0
    vacuous: bool = False

    def to_dict(self) -> dict:
        return {
            "t": self.t,
            "value": self.value,
            "kind": self.kind,
            "n_x": self.n_x,
            "n_A": self.n_A,
            "std_err": self.std_err,
        }


def _check_side(side: str) -> None:
    if side not in SIDES:
        raise ValueError(f"side must be 'low' or 'upp', got {side!r}")


def gaussian_exact_conc(t: float, m: int, side: str) -> ConcentrationEstimate:
    """P(||Ax|| <= t||x||) (low) or P(||Ax|| >= t||x||) (upp) for A with N(0, 1/m) entries.

    m ||Ax||^2 / ||x||^2 is chi-square with m degrees of freedom for every x,
    so the value is a uniform constant over any direction set.
    """
    _check_side(side)
    if not t > 0:
        raise ValueError("t must be positive")
    if m < 1:
        raise ValueError("m must be >= 1")
    if math.isinf(t):
        value = 1.0 if side == "low" else 0.0
    elif side == "low":
        value = chi_square_cdf(m * t * t, m)
    else:
        value = chi_square_sf(m * t * t, m)
    return ConcentrationEstimate(float(t), float(value), "exact")


def bernstein_orthog_bound(t: float, m: float, mu: float, side: str) -> ConcentrationEstimate:
    """Bernstein tail bound 2 exp(-(m s^2 / 2) / (mu (1 + s/3))) for subsampled orthogonal operators.

    The relative deviation is s = t^2 - 1 on the upper side (t > 1) and
    s = 1 - t^2 on the lower side (t < 1). t = 1 gives s = 0 and is returned
    as the vacuous value 1 with ``vacuous`` set.
    """
    _check_side(side)
    if mu < 1:
        raise ValueError("mu must be >= 1")
    if not t > 0:
        raise ValueError("t must be positive")
    if t == 1:
        return ConcentrationEstimate(1.0, 1.0, "analytic_bound", vacuous=True)
    if side == "upp" and t < 1:
        raise ValueError("upper-side bound needs t > 1")
    if side == "low" and t > 1:
        raise ValueError("lower-side bound needs t < 1")
    s = t * t - 1.0 if side == "upp" else 1.0 - t * t
    value = 2.0 * math.exp(-(m * s * s / 2.0) / (mu * (1.0 + s / 3.0)))
    return ConcentrationEstimate(float(t), min(1.0, value), "analytic_bound")


def norm_ratios(op, directions: np.ndarray) -> np.ndarray:
    """||A x|| / ||x|| for each row x of ``directions``."""
    return np.linalg.norm(op.apply(directions), axis=-1) / np.linalg.norm(directions, axis=-1)


def _sample_directions(direction_sampler: Callable, n_x: int, rng) -> np.ndarray:
    dirs = []
    attempts = 0
    while len(dirs) < n_x:
        attempts += 1
        if attempts > 100 * n_x:
            raise ValueError("direction_sampler produced only (near-)zero vectors")
        x = np.asarray(direction_sampler(rng), dtype=float)
        if np.linalg.norm(x) >= _ZERO_NORM:
            dirs.append(x)
    return np.stack(dirs)


def norm_ratio_samples(spec: OperatorSpec, m: int, directions: np.ndarray, n_A: int, stream) -> np.ndarray:
    """||Ax|| / ||x|| for n_A operator draws (rows) and every direction (columns)."""
    n = directions.shape[-1]
    rng = as_generator(stream)
    out = np.empty((n_A, len(directions)))
    if isinstance(spec, SubsampledOrthogonal):
        # U x does not depend on the draw; only the kept rows do.
        sq = basis_transform(spec.basis, directions) ** 2
        norms = np.linalg.norm(directions, axis=-1)
        for k in range(n_A):
            op = draw_operator(spec, m, n, rng)
            out[k] = op.scale * np.sqrt(sq[:, op.rows].sum(axis=1)) / norms
        return out
    for k in range(n_A):
        out[k] = norm_ratios(draw_operator(spec, m, n, rng), directions)
    return out


def count_events(ratios: np.ndarray, t, side: str) -> np.ndarray:
    """Event counts per (threshold, direction) from a ratio sample of shape (n_A, n_x)."""
    _check_side(side)
    ts = np.atleast_1d(np.asarray(t, dtype=float))
    if side == "low":
        return np.stack([np.count_nonzero(ratios <= v, axis=0) for v in ts])
    return np.stack([np.count_nonzero(ratios >= v, axis=0) for v in ts])


def conc_event_counts(spec: OperatorSpec, m: int, directions: np.ndarray, t, side: str,
                      n_A: int, stream) -> np.ndarray:
    """Counts of {||Ax|| <= t||x||} (low) / {||Ax|| >= t||x||} (upp) over n_A shared draws.

    ``t`` may be a scalar or 1-D array; the result has shape (len(t), n_x).
    """
    _check_side(side)
    return count_events(norm_ratio_samples(spec, m, directions, n_A, stream), t, side)


def estimate_conc_mc(spec: OperatorSpec, m: int, n: int, direction_sampler: Callable, t: float,
                     side: str, n_x: int, n_A: int, stream) -> ConcentrationEstimate:
    """Max over n_x sampled directions of the empirical event frequency over n_A draws.

    The max over finitely many directions is a lower estimate of the supremum
    over the whole direction set. ``std_err`` is the binomial standard error
    at the maximizing direction.
    """
    if n_x < 1 or n_A < 1:
        raise ValueError("n_x and n_A must be >= 1")
    _check_side(side)
    base = stream if isinstance(stream, RandomStream) else None
    rng_dirs = base.child("directions").generator() if base else as_generator(stream)
    rng_ops = base.child("operators").generator() if base else rng_dirs
    directions = _sample_directions(direction_sampler, n_x, rng_dirs)
    if directions.shape[-1] != n:
        raise ValueError(f"direction dimension {directions.shape[-1]} != n={n}")
    counts = conc_event_counts(spec, m, directions, t, side, n_A, rng_ops)[0]
    best = int(np.argmax(counts))
    p = counts[best] / n_A
    return ConcentrationEstimate(float(t), float(p), "monte_carlo", n_x, n_A, math.sqrt(p * (1 - p) / n_A))


def c_abs_bound(spec: OperatorSpec, m: int, n: int, s_radius: float, t_threshold: float,
                direction_sampler: Optional[Callable] = None, n_x: int = 8, n_A: int = 1000,
                stream=None) -> ConcentrationEstimate:
    """C_abs(s, t) = sup_{||x|| <= s} P(||Ax|| >= t).

    Zero whenever s = 0, and for subsampled operators whenever t >= s sqrt(n/m)
    because ||A|| <= sqrt(n/m) surely. Otherwise sampled directions are
    rescaled to norm s and the upper event is estimated by Monte Carlo.
    """
    if s_radius < 0:
        raise ValueError("s_radius must be nonnegative")
    if s_radius == 0:
        return ConcentrationEstimate(float(t_threshold), 0.0, "exact")
    if isinstance(spec, SubsampledOrthogonal) and t_threshold >= s_radius * math.sqrt(n / m):
        return ConcentrationEstimate(float(t_threshold), 0.0, "analytic_bound")
    if stream is None:
        raise ValueError("a random stream is required for the Monte Carlo branch")
    if direction_sampler is None:
        direction_sampler = lambda rng: rng.standard_normal(n)  # noqa: E731
    # ||Ax|| >= t with ||x|| = s  <=>  ||Ax|| / ||x|| >= t / s
    est = estimate_conc_mc(spec, m, n, direction_sampler, t_threshold / s_radius, "upp", n_x, n_A, stream)
    return ConcentrationEstimate(float(t_threshold), est.value, "monte_carlo", est.n_x, est.n_A, est.std_err)
