"""Posterior distributions P(. | y, A) under Gaussian noise N(0, (sigma^2/m) I_q).

* Dirac mixtures give an exact categorical posterior.
* Gaussian mixtures are conjugate: each component stays Gaussian with a
  shared precision matrix, and the mixture weights pick up the marginal
  likelihood of y.
* Generative (or any samplable) priors use self-normalized importance
  sampling with the prior as proposal.
* Sparse Gaussian priors use support enumeration restricted to a screened
  pool of candidate coordinates (exact when every nonzero column of A fits
  in the pool).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
from scipy import linalg
from scipy.special import gammaln, logsumexp

from .numerics import as_generator
from .noise import NoiseSpec
from .operators import DrawnOperator
from .priors import (
    DiracMixture,
    GaussianMixture,
    PerturbedPrior,
    SparseGaussian,
    sample_prior_batch,
)

DEFAULT_SUPPORT_POOL = 20


def _normalize(log_w: np.ndarray) -> np.ndarray:
    log_w = np.asarray(log_w, dtype=float)
    return log_w - logsumexp(log_w)


def _probabilities(log_weights: np.ndarray) -> np.ndarray:
    p = np.exp(log_weights - np.max(log_weights))
    return p / p.sum()


def _draw_indices(log_weights: np.ndarray, rng, size: Optional[int]):
    p = _probabilities(log_weights)
    if size is None:
        return int(rng.choice(len(p), p=p))
    return rng.choice(len(p), size=size, p=p)


@dataclass(frozen=True, eq=False)
class Categorical:
    points: np.ndarray
    log_weights: np.ndarray

    @property
    def weights(self) -> np.ndarray:
        return _probabilities(self.log_weights)

    def mean(self) -> np.ndarray:
        return self.weights @ self.points


@dataclass(frozen=True, eq=False)
class GaussianMixturePosterior:
    """Mixture of Gaussians sharing the precision Lambda = L L^T."""

    component_means: np.ndarray
    precision_cholesky: np.ndarray  # lower-triangular L
    log_weights: np.ndarray

    @property
    def weights(self) -> np.ndarray:
        return _probabilities(self.log_weights)

    def component_covariance(self) -> np.ndarray:
        eye = np.eye(self.precision_cholesky.shape[0])
        return linalg.cho_solve((self.precision_cholesky, True), eye)

    def mean(self) -> np.ndarray:
        return self.weights @ self.component_means

    def covariance(self) -> np.ndarray:
        centered = self.component_means - self.mean()
        between = (centered * self.weights[:, None]).T @ centered
        return self.component_covariance() + between


@dataclass(frozen=True, eq=False)
class Particle:
    particles: np.ndarray
    log_weights: np.ndarray
    effective_sample_size: float
    degenerate: bool = False

    @property
    def weights(self) -> np.ndarray:
        return _probabilities(self.log_weights)


@dataclass(frozen=True, eq=False)
class SparseSupportPosterior:
    """Posterior of a sparse Gaussian prior as a mixture over supports.

    Candidate supports consist of ``r`` pool coordinates (the arrays in
    ``supports``/``means``/``chols`` are indexed by r) together with s - r
    coordinates whose columns of A vanish. The vanishing coordinates are
    exchangeable, so they enter as one block with the binomial multiplicity
    folded into the log-weight, and their values are drawn from the prior.
    """

    n: int
    s: int
    zero_columns: np.ndarray
    supports: dict  # r -> (G_r, r) int array
    means: dict  # r -> (G_r, r)
    chols: dict  # r -> (G_r, r, r), lower Cholesky factors of the precision
    log_weights: np.ndarray  # concatenated over r in increasing order
    exact: bool

    def _locate(self, flat: int):
        for r in sorted(self.supports):
            size = len(self.supports[r])
            if flat < size:
                return r, flat
            flat -= size
        raise IndexError(flat)

    def draw(self, rng) -> np.ndarray:
        r, g = self._locate(_draw_indices(self.log_weights, rng, None))
        x = np.zeros(self.n)
        if r:
            z = rng.standard_normal(r)
            x[self.supports[r][g]] = self.means[r][g] + linalg.solve_triangular(
                self.chols[r][g], z, lower=True, trans="T"
            )
        if r < self.s:
            extra = rng.choice(self.zero_columns, size=self.s - r, replace=False)
            x[extra] = rng.standard_normal(self.s - r)
        return x


PosteriorModel = Union[Categorical, GaussianMixturePosterior, Particle, SparseSupportPosterior]


def _check_y(op: DrawnOperator, y) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    if y.shape != (op.q,):
        raise ValueError(f"y must have length q={op.q}, got shape {y.shape}")
    return y


def dirac_log_weights(prior, op: DrawnOperator, ys, noise: NoiseSpec) -> np.ndarray:
    """Normalized posterior log-weights for a batch of measurements (rows of ``ys``)."""
    if isinstance(prior, PerturbedPrior):
        prior = prior.as_dirac()
    ys = np.asarray(ys, dtype=float)
    if ys.shape[-1] != op.q:
        raise ValueError(f"y must have length q={op.q}, got shape {ys.shape}")
    images = op.apply(np.asarray(prior.points, dtype=float))
    # ||y - A x_i||^2 expanded so a batch of y needs one matrix product.
    sq = (np.sum(ys**2, axis=-1)[..., None] - 2.0 * ys @ images.T + np.sum(images**2, axis=-1))
    with np.errstate(divide="ignore"):
        log_a = np.log(np.asarray(prior.weights, dtype=float))
    log_w = log_a - 0.5 * noise.precision_factor * sq
    return log_w - logsumexp(log_w, axis=-1, keepdims=True)


def posterior_dirac(prior, op: DrawnOperator, y, noise: NoiseSpec) -> Categorical:
    """log w_i = log a_i - (m / 2 sigma^2) ||y - A x_i||^2, normalized."""
    if isinstance(prior, PerturbedPrior):
        prior = prior.as_dirac()
    y = _check_y(op, y)
    points = np.asarray(prior.points, dtype=float)
    resid = y - op.apply(points)
    with np.errstate(divide="ignore"):
        log_a = np.log(np.asarray(prior.weights, dtype=float))
    log_w = log_a - 0.5 * noise.precision_factor * np.sum(resid**2, axis=1)
    return Categorical(points, _normalize(log_w))


def posterior_gaussian_mixture(prior: GaussianMixture, op: DrawnOperator, y,
                               noise: NoiseSpec) -> GaussianMixturePosterior:
    y = _check_y(op, y)
    if not prior.tau > 0:
        raise ValueError("tau must be positive")
    a = op.to_dense()
    n = a.shape[1]
    v = noise.variance
    tau2 = prior.tau**2
    precision = np.eye(n) / tau2 + (a.T @ a) / v
    try:
        chol = linalg.cholesky(precision, lower=True)
    except linalg.LinAlgError as exc:
        raise linalg.LinAlgError(
            f"posterior precision is not numerically SPD (condition ~ {np.linalg.cond(precision):.3e})"
        ) from exc
    means = np.asarray(prior.means, dtype=float)
    rhs = means / tau2 + (a.T @ y) / v
    post_means = linalg.cho_solve((chol, True), rhs.T).T

    # Marginal of y under component i: N(A mu_i, v I + tau^2 A A^T).
    cov_y = v * np.eye(op.q) + tau2 * (a @ a.T)
    try:
        chol_y = linalg.cholesky(cov_y, lower=True)
    except linalg.LinAlgError as exc:
        raise linalg.LinAlgError(
            f"marginal covariance is not numerically SPD (condition ~ {np.linalg.cond(cov_y):.3e})"
        ) from exc
    resid = y - means @ a.T
    white = linalg.solve_triangular(chol_y, resid.T, lower=True)
    log_lik = -0.5 * np.sum(white**2, axis=0)
    with np.errstate(divide="ignore"):
        log_w = np.log(np.asarray(prior.weights, dtype=float)) + log_lik
    return GaussianMixturePosterior(post_means, chol, _normalize(log_w))


def posterior_particles(prior, op: DrawnOperator, y, noise: NoiseSpec, n_particles: int,
                        stream) -> Particle:
    """Self-normalized importance sampling with the prior as proposal.

    A biased finite-sample approximation of the posterior. ``degenerate`` is
    set when the effective sample size falls below 2.
    """
    if n_particles < 2:
        raise ValueError("n_particles must be >= 2")
    y = _check_y(op, y)
    particles = sample_prior_batch(prior, stream, n_particles)
    resid = y - op.apply(particles)
    log_w = _normalize(-0.5 * noise.precision_factor * np.sum(resid**2, axis=1))
    ess = float(1.0 / np.sum(np.exp(2.0 * log_w)))
    return Particle(particles, log_w, ess, ess < 2.0)


def _log_comb(n: int, k: int) -> float:
    return float(gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1))


def _support_evidence(gram: np.ndarray, b: np.ndarray, v: float, combos: np.ndarray):
    """Batched log-evidence of the supports in ``combos`` (rows of column indices).

    Returns (log_evidence, cholesky of v I + G_T, (v I + G_T)^{-1} b_T).
    """
    r = combos.shape[1]
    g_t = gram[combos[:, :, None], combos[:, None, :]]
    b_t = b[combos]
    mat = g_t + v * np.eye(r)
    lower = np.linalg.cholesky(mat)
    w = np.linalg.solve(lower, b_t[..., None])[..., 0]
    logdet = 2.0 * np.sum(np.log(np.diagonal(lower, axis1=1, axis2=2)), axis=1) - r * math.log(v)
    mean = np.linalg.solve(np.swapaxes(lower, 1, 2), w[..., None])[..., 0]
    return -0.5 * logdet + np.sum(w**2, axis=1) / (2.0 * v), lower, mean


def _screen_pool(gram: np.ndarray, b: np.ndarray, v: float, s: int, per_stage: int) -> np.ndarray:
    """Candidate coordinates from greedy forward selection with per-step shortlists.

    At each of the s forward steps, and again for each leave-one-out subset
    of the final greedy support, the ``per_stage`` coordinates that most
    increase the evidence are added to the pool.
    """
    n_cols = len(b)
    pool = set()

    def shortlist(base: list) -> np.ndarray:
        rest = np.setdiff1d(np.arange(n_cols), base)
        combos = np.column_stack([np.tile(base, (len(rest), 1)), rest]).astype(int)
        ev, _, _ = _support_evidence(gram, b, v, combos)
        return rest[np.argsort(-ev, kind="stable")[:per_stage]]

    support: list = []
    for _ in range(min(s, n_cols)):
        best = shortlist(support)
        pool.update(int(j) for j in best)
        support.append(int(best[0]))
    if len(support) > 1:
        for i in range(len(support)):
            pool.update(int(j) for j in shortlist(support[:i] + support[i + 1:]))
    return np.array(sorted(pool), dtype=int)


def posterior_sparse(prior: SparseGaussian, op: DrawnOperator, y, noise: NoiseSpec,
                     pool_size: int = DEFAULT_SUPPORT_POOL) -> SparseSupportPosterior:
    """Support-enumeration posterior for the s-sparse Gaussian prior.

    With v = sigma^2/m, G_T = A_T^T A_T and b_T = A_T^T y, the support
    evidence is (up to a common constant)
        -1/2 logdet(I + G_T / v) + b_T^T (v I + G_T)^{-1} b_T / (2 v),
    and x_T | T, y is Gaussian with mean (v I + G_T)^{-1} b_T and precision
    I + G_T / v. When more than ``pool_size`` columns of A are nonzero the
    enumeration runs over a screened pool (see ``_screen_pool``) and the
    result is flagged as inexact.
    """
    y = _check_y(op, y)
    n, s = prior.n, prior.s
    a = op.to_dense()
    v = noise.variance
    col_norm2 = np.sum(a**2, axis=0)
    scale = max(float(col_norm2.max()), 1.0)
    nonzero = np.flatnonzero(col_norm2 > 1e-24 * scale)
    zero = np.setdiff1d(np.arange(n), nonzero)

    a_nz = a[:, nonzero]
    gram_nz = a_nz.T @ a_nz
    b_nz = a_nz.T @ y
    exact = len(nonzero) <= pool_size
    if exact:
        local = np.arange(len(nonzero))
    else:
        local = _screen_pool(gram_nz, b_nz, v, s, max(1, pool_size // (2 * s)))
    pool = nonzero[local]
    gram = gram_nz[np.ix_(local, local)]
    b_pool = b_nz[local]

    supports, means, chols, log_parts = {}, {}, {}, []
    for r in range(max(0, s - len(zero)), min(s, len(pool)) + 1):
        mult = _log_comb(len(zero), s - r)
        if r == 0:
            supports[0] = np.zeros((1, 0), dtype=int)
            means[0] = np.zeros((1, 0))
            chols[0] = np.zeros((1, 0, 0))
            log_parts.append(np.array([mult]))
            continue
        combos = np.array(list(itertools.combinations(range(len(pool)), r)), dtype=int)
        ev, lower, mean = _support_evidence(gram, b_pool, v, combos)
        log_parts.append(ev + mult)
        supports[r] = pool[combos]
        means[r] = mean
        chols[r] = lower / math.sqrt(v)
    log_w = _normalize(np.concatenate(log_parts))
    return SparseSupportPosterior(n, s, zero, supports, means, chols, log_w, exact)


def sample_posterior(model: PosteriorModel, stream, size: Optional[int] = None) -> np.ndarray:
    """One draw (size=None) or ``size`` draws stacked along axis 0."""
    rng = as_generator(stream)
    if isinstance(model, SparseSupportPosterior):
        if size is None:
            return model.draw(rng)
        return np.stack([model.draw(rng) for _ in range(size)])
    if isinstance(model, (Categorical, Particle)):
        pts = model.points if isinstance(model, Categorical) else model.particles
        idx = _draw_indices(model.log_weights, rng, size)
        return pts[idx].copy()
    if isinstance(model, GaussianMixturePosterior):
        idx = _draw_indices(model.log_weights, rng, size)
        n = model.component_means.shape[1]
        z = rng.standard_normal(n if size is None else (size, n))
        # x = mu + L^{-T} z has covariance (L L^T)^{-1}.
        noise = linalg.solve_triangular(model.precision_cholesky, z.T, lower=True, trans="T").T
        return model.component_means[idx] + noise
    raise TypeError(f"unsupported posterior model {type(model).__name__}")


def build_posterior(prior, op: DrawnOperator, y, noise: NoiseSpec, mode: str = "exact",
                    n_particles: int = 1000, pool_size: int = DEFAULT_SUPPORT_POOL, stream=None):
    """Dispatch on the prior type and the requested posterior mode."""
    if mode == "exact":
        if isinstance(prior, (DiracMixture, PerturbedPrior)):
            return posterior_dirac(prior, op, y, noise)
        if isinstance(prior, GaussianMixture):
            return posterior_gaussian_mixture(prior, op, y, noise)
        raise ValueError(f"exact posterior unsupported for {type(prior).__name__}")
    if mode == "sparse_support":
        if not isinstance(prior, SparseGaussian):
            raise ValueError("sparse_support posterior needs a sparse_gaussian model prior")
        return posterior_sparse(prior, op, y, noise, pool_size)
    if mode == "particles":
        if stream is None:
            raise ValueError("particle posterior needs a random stream")
        return posterior_particles(prior, op, y, noise, n_particles, stream)
    raise ValueError(f"unknown posterior mode {mode!r}")
