"""Approximate covering numbers Cov_{eta,delta}: greedy, exact (small Dirac priors) and analytic.

Analytic routines return the logarithm of the covering-number bound, which is
the form consumed by the main bound (k = log Cov).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .priors import DiracMixture, pairwise_distances

MAX_EXACT_POINTS = 22
_MASS_TOL = 1e-12


@dataclass(frozen=True)
class CoverResult:
    center_indices: tuple
    eta: float
    delta: float
    covered_fraction: float
    count: int

    def to_dict(self) -> dict:
        return {
            "count": self.count,
            "covered_fraction": self.covered_fraction,
            "eta": self.eta,
            "delta": self.delta,
            "center_indices": list(self.center_indices),
        }


def _check_eta_delta(eta: float, delta: float, allow_zero_delta: bool = True) -> None:
    if not eta > 0:
        raise ValueError("eta must be positive")
    lo_ok = delta >= 0 if allow_zero_delta else delta > 0
    if not lo_ok or delta > 1:
        raise ValueError(f"delta out of range: {delta}")


def _neighbourhoods(points: np.ndarray, eta: float):
    """CSR-style adjacency of the closed eta-balls around every point."""
    tree = cKDTree(points)
    lists = tree.query_ball_point(points, r=eta)
    lengths = np.fromiter((len(x) for x in lists), dtype=np.int64, count=len(lists))
    indptr = np.concatenate(([0], np.cumsum(lengths)))
    indices = np.fromiter(itertools.chain.from_iterable(lists), dtype=np.int64, count=int(indptr[-1]))
    return indptr, indices


def greedy_cover(samples, eta: float, delta: float, weights: Optional[Sequence[float]] = None) -> CoverResult:
    """Greedy set cover of a sample set by eta-balls centered at samples.

    Each step takes the sample whose ball holds the largest uncovered mass
    (lowest index on ties) and stops once the covered mass reaches 1 - delta.
    Unweighted samples each carry mass 1/N, and the stopping rule is then
    ceil((1 - delta) N) covered samples. The count is an upper estimate of
    the empirical covering number.
    """
    pts = np.asarray(samples, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    n_pts = pts.shape[0]
    if n_pts == 0:
        raise ValueError("samples must be nonempty")
    _check_eta_delta(eta, delta)
    if delta >= 1:
        raise ValueError("delta must be < 1")

    if weights is None:
        w = np.ones(n_pts)
        target = math.ceil((1.0 - delta) * n_pts - 1e-9)
        total = float(n_pts)
    else:
        w = np.asarray(weights, dtype=float)
        if w.shape != (n_pts,) or np.any(w < 0):
            raise ValueError("weights must be nonnegative, one per sample")
        total = float(w.sum())
        target = (1.0 - delta) * total - _MASS_TOL * total

    indptr, indices = _neighbourhoods(pts, eta)
    owners = np.repeat(np.arange(n_pts), np.diff(indptr))
    # gain[j] = uncovered mass inside the ball around j
    gain = np.bincount(owners, weights=w[indices], minlength=n_pts)
    uncovered = np.ones(n_pts, dtype=bool)
    covered_mass = 0.0
    centers = []
    while covered_mass < target:
        c = int(np.argmax(gain))  # argmax returns the first maximum
        if gain[c] <= 0:
            break
        ball = indices[indptr[c]:indptr[c + 1]]
        fresh = ball[uncovered[ball]]
        uncovered[fresh] = False
        covered_mass += float(w[fresh].sum())
        centers.append(c)
        # Balls are symmetric, so the balls that contained a fresh point are its neighbours.
        starts, ends = indptr[fresh], indptr[fresh + 1]
        touched = np.concatenate([indices[a:b] for a, b in zip(starts, ends)]) if len(fresh) else np.empty(0, int)
        reps = np.repeat(w[fresh], ends - starts)
        np.subtract.at(gain, touched, reps)
        gain[c] = 0.0
    return CoverResult(tuple(centers), float(eta), float(delta), covered_mass / total, len(centers))


def _exact_cover(points: np.ndarray, weights: np.ndarray, eta: float, delta: float):
    n_pts = len(points)
    target = 1.0 - delta - _MASS_TOL
    if n_pts == 1:
        return (0,), float(weights[0])

    dist = pairwise_distances(points)
    if np.min(dist[~np.eye(n_pts, dtype=bool)]) > 2 * eta:
        order = np.argsort(-weights, kind="stable")
        cum = np.cumsum(weights[order])
        k = int(np.searchsorted(cum, target) + 1)
        k = min(k, n_pts)
        return tuple(int(i) for i in order[:k]), float(cum[k - 1])

    masks = []
    for i in range(n_pts):
        bits = 0
        for j in np.flatnonzero(dist[i] <= eta):
            bits |= 1 << int(j)
        masks.append(bits)

    # Split-table lookup for the mass of a bitmask.
    half = (n_pts + 1) // 2
    lo_tab = np.zeros(1 << half)
    hi_tab = np.zeros(1 << (n_pts - half))
    for b in range(half):
        lo_tab[1 << b:2 << b] = lo_tab[: 1 << b] + weights[b]
    for b in range(n_pts - half):
        hi_tab[1 << b:2 << b] = hi_tab[: 1 << b] + weights[half + b]
    lo_mask = (1 << half) - 1

    def mass(bits: int) -> float:
        return float(lo_tab[bits & lo_mask] + hi_tab[bits >> half])

    # Drop balls whose point set is contained in another ball's (keep lowest index).
    cand = []
    for i, mi in enumerate(masks):
        dominated = any(
            (mi | mj) == mj and (mi != mj or j < i) for j, mj in enumerate(masks) if j != i
        )
        if not dominated:
            cand.append(i)
    cand.sort(key=lambda i: -mass(masks[i]))
    cand_masks = [masks[i] for i in cand]
    cand_mass = [mass(m) for m in cand_masks]

    best = None

    def search(start: int, chosen: list, bits: int, remaining: int):
        nonlocal best
        covered = mass(bits)
        if covered >= target:
            best = (tuple(cand[i] for i in chosen), covered)
            return True
        if remaining == 0:
            return False
        # Upper bound: add the heaviest `remaining` balls still available.
        if covered + sum(cand_mass[start:start + remaining]) < target:
            return False
        for idx in range(start, len(cand)):
            new_bits = bits | cand_masks[idx]
            if new_bits == bits:
                continue
            chosen.append(idx)
            if search(idx + 1, chosen, new_bits, remaining - 1):
                return True
            chosen.pop()
        return False

    for k in range(1, len(cand) + 1):
        if search(0, [], 0, k):
            return best
    return tuple(cand), mass(_union(cand_masks))


def _union(masks) -> int:
    bits = 0
    for m in masks:
        bits |= m
    return bits


def exact_cover_dirac_result(prior: DiracMixture, eta: float, delta: float) -> CoverResult:
    count = len(prior.weights)
    if count > MAX_EXACT_POINTS:
        raise ValueError(f"exact cover supports at most {MAX_EXACT_POINTS} points, got {count}")
    _check_eta_delta(eta, delta)
    centers, covered = _exact_cover(np.asarray(prior.points), np.asarray(prior.weights), eta, delta)
    return CoverResult(tuple(centers), float(eta), float(delta), min(1.0, covered), len(centers))


def exact_cover_dirac(prior: DiracMixture, eta: float, delta: float) -> int:
    """Minimum number of eta-balls centered at support points holding mass >= 1 - delta."""
    return exact_cover_dirac_result(prior, eta, delta).count


# ---------------------------------------------------------------------------
# Analytic bounds (all return log Cov)
# ---------------------------------------------------------------------------


def _radius_factor(dim: int, delta: float) -> float:
    return 1.0 + math.sqrt(2.0 / dim * math.log(1.0 / delta))


def _check_analytic(eta: float, delta: float) -> None:
    if not eta > 0:
        raise ValueError("eta must be positive")
    if not 0 < delta <= 1:
        raise ValueError("delta must lie in (0, 1]")


def analytic_cov_lipschitz(k: int, L: float, eta: float, delta: float) -> float:
    """log Cov bound for a Gaussian latent pushed through an L-Lipschitz map from R^k."""
    if k < 1 or L < 0:
        raise ValueError("need k >= 1 and L >= 0")
    _check_analytic(eta, delta)
    return k * math.log1p(2.0 * math.sqrt(k) * L / eta * _radius_factor(k, delta))


def analytic_cov_sparse(n: int, s: int, eta: float, delta: float) -> float:
    if not 1 <= s <= n:
        raise ValueError(f"need 1 <= s <= n, got s={s}, n={n}")
    _check_analytic(eta, delta)
    return s * (math.log(math.e * n / s) + math.log1p(2.0 * math.sqrt(s) / eta * _radius_factor(s, delta)))


def analytic_cov_gaussian(n: int, sigma: float, eta: float, delta: float) -> float:
    if n < 1 or sigma < 0:
        raise ValueError("need n >= 1 and sigma >= 0")
    _check_analytic(eta, delta)
    return n * math.log1p(2.0 * math.sqrt(n) * sigma * _radius_factor(n, delta) / eta)


def analytic_cov_gaussian_mixture(n_components: int, n: int, tau: float, eta: float, delta: float) -> float:
    """log of the summed per-component Gaussian bounds (equal covariances)."""
    if n_components < 1:
        raise ValueError("need at least one component")
    return math.log(n_components) + analytic_cov_gaussian(n, tau, eta, delta)


def mixture_cov_bound(component_counts) -> int:
    counts = list(component_counts)
    if not counts:
        raise ValueError("component_counts must be nonempty")
    return int(sum(counts))
