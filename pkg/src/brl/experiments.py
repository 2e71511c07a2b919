"""Monte Carlo harness: x* ~ R, A ~ A, e ~ E, x_hat ~ P(. | y, A), repeated over m."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import bounds as bnd
from .covering import (
    MAX_EXACT_POINTS,
    analytic_cov_gaussian_mixture,
    analytic_cov_lipschitz,
    analytic_cov_sparse,
    exact_cover_dirac,
    greedy_cover,
)
from .errors import ConfigError
from .noise import NoiseSpec, draw_noise
from .numerics import RandomStream, derive_stream_id
from .operators import (
    OperatorSpec,
    Subgaussian,
    SubsampledOrthogonal,
    coherence_of_differences,
    coherence_sparse,
    draw_operator,
)
from .posterior import DEFAULT_SUPPORT_POOL, build_posterior, sample_posterior
from .priors import (
    DiracMixture,
    GaussianMixture,
    GenerativePushforward,
    PerturbedPrior,
    PriorSpec,
    SparseGaussian,
    lipschitz_bound,
    prior_to_dict,
    sample_coupled,
    sample_prior,
    wasserstein_infty_certificate,
)

log = logging.getLogger(__name__)

CSV_COLUMNS = (
    "m",
    "trials",
    "failures",
    "p_hat",
    "wilson_low",
    "wilson_high",
    "bound_total",
    "threshold",
    "mean_q",
    "seed",
)
ROLES = ("prior", "operator", "noise", "posterior")
POSTERIOR_MODES = ("exact", "particles", "sparse_support")
BOUND_MODES = ("none", "theorem_main", "simplified")
Z95 = 1.959963984540054


@dataclass(frozen=True)
class BoundSettings:
    """Parameters of the attached bound that the experiment itself does not fix."""

    delta: float = 0.01
    c_prime: float = 2.0
    t: float = 2.0
    p_order: float = math.inf
    k: Optional[float] = None
    eps: Optional[float] = None
    d: float = 2.0


@dataclass(frozen=True, eq=False)
class ExperimentConfig:
    real_prior: PriorSpec
    operator: OperatorSpec
    sigma: float
    m_values: tuple
    threshold_factor: float
    eta: float
    trials: int
    master_seed: int = 0
    model_prior: Optional[PriorSpec] = None
    posterior_mode: str = "exact"
    n_particles: int = 1000
    support_pool: int = DEFAULT_SUPPORT_POOL
    bound_mode: str = "none"
    bound: BoundSettings = field(default_factory=BoundSettings)

    def __post_init__(self):
        if self.trials < 1:
            raise ConfigError("/trials", "trials must be >= 1")
        if not self.m_values:
            raise ConfigError("/m_values", "m_values must be nonempty")
        for i, m in enumerate(self.m_values):
            if int(m) != m or m < 1:
                raise ConfigError(f"/m_values/{i}", "each m must be an integer >= 1")
        if not self.threshold_factor > 0:
            raise ConfigError("/threshold_factor", "threshold_factor must be positive")
        if not self.sigma > 0:
            raise ConfigError("/sigma", "sigma must be positive")
        if self.eta < 0:
            raise ConfigError("/eta", "eta must be nonnegative")
        if self.posterior_mode not in POSTERIOR_MODES:
            raise ConfigError("/posterior_mode", f"unknown posterior mode {self.posterior_mode!r}")
        if self.bound_mode not in BOUND_MODES:
            raise ConfigError("/bound_mode", f"unknown bound mode {self.bound_mode!r}")
        if self.n_particles < 2:
            raise ConfigError("/n_particles", "n_particles must be >= 2")
        if self.support_pool < 1:
            raise ConfigError("/support_pool", "support_pool must be >= 1")
        if not 0 <= self.master_seed < 2**64:
            raise ConfigError("/master_seed", "master_seed must be a 64-bit unsigned integer")
        if self.model.n != self.real_prior.n:
            raise ConfigError("/model_prior", "real and model priors live in different dimensions")
        if isinstance(self.operator, SubsampledOrthogonal) and max(self.m_values) > self.n:
            raise ConfigError("/m_values", "subsampled operators need m <= n")
        exact_ok = (DiracMixture, GaussianMixture, PerturbedPrior)
        if self.posterior_mode == "exact" and not isinstance(self.model, exact_ok):
            raise ConfigError("/posterior_mode", f"exact posterior unsupported for {type(self.model).__name__}")
        if self.posterior_mode == "sparse_support" and not isinstance(self.model, SparseGaussian):
            raise ConfigError("/posterior_mode", "sparse_support needs a sparse_gaussian model prior")

    @property
    def model(self) -> PriorSpec:
        return self.real_prior if self.model_prior is None else self.model_prior

    @property
    def n(self) -> int:
        return self.real_prior.n

    @property
    def threshold(self) -> float:
        return self.threshold_factor * (self.eta + self.sigma)


@dataclass(frozen=True)
class TrialResult:
    error_norm: float
    failed: bool
    q: int
    resampled: int = 0
    coupling_gap: Optional[float] = None


def same_prior(a: PriorSpec, b: PriorSpec) -> bool:
    return a is b or prior_to_dict(a) == prior_to_dict(b)


def coupled_base(config: ExperimentConfig) -> bool:
    """True when R is a perturbation of P, so x* and its model counterpart share a draw."""
    real = config.real_prior
    return isinstance(real, PerturbedPrior) and not same_prior(real, config.model) and same_prior(real.base, config.model)


def trial_stream(master_seed: int, m: int, trial_index: int, role: str) -> RandomStream:
    return RandomStream(master_seed, derive_stream_id("trial", int(m), int(trial_index), role))


def run_trial(config: ExperimentConfig, m: int, trial_index: int) -> TrialResult:
    streams = {role: trial_stream(config.master_seed, m, trial_index, role) for role in ROLES}
    gap = None
    if coupled_base(config):
        model_point, x_star, _ = sample_coupled(config.real_prior, streams["prior"])
        gap = float(np.linalg.norm(x_star - model_point))
    else:
        x_star = sample_prior(config.real_prior, streams["prior"])
    op = draw_operator(config.operator, m, config.n, streams["operator"])
    noise = NoiseSpec(config.sigma, m)
    y = op.apply(x_star) + draw_noise(noise, op.q, streams["noise"])
    post_stream = streams["posterior"]
    model = build_posterior(
        config.model, op, y, noise, config.posterior_mode,
        n_particles=config.n_particles, pool_size=config.support_pool,
        stream=post_stream.child("particles"),
    )
    x_hat = sample_posterior(model, post_stream)
    err = float(np.linalg.norm(x_star - x_hat))
    return TrialResult(err, err >= config.threshold, op.q, op.resampled, gap)


def wilson_interval(failures: int, trials: int, z: float = Z95):
    """Wilson score interval for a binomial proportion."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if not 0 <= failures <= trials:
        raise ValueError("need 0 <= failures <= trials")
    if not z > 0:
        raise ValueError("z must be positive")
    p = failures / trials
    z2 = z * z
    denom = 1.0 + z2 / trials
    centre = (p + z2 / (2 * trials)) / denom
    half = z * math.sqrt(p * (1 - p) / trials + z2 / (4 * trials * trials)) / denom
    low = 0.0 if failures == 0 else max(0.0, centre - half)
    high = 1.0 if failures == trials else min(1.0, centre + half)
    return low, high


# ---------------------------------------------------------------------------
# Bound attachment
# ---------------------------------------------------------------------------


def log_cover_estimate(prior: PriorSpec, eta: float, delta: float) -> float:
    """log Cov_{eta,delta} of a prior: exact or greedy for point masses, analytic otherwise."""
    if isinstance(prior, PerturbedPrior):
        prior = prior.as_dirac()
    if isinstance(prior, DiracMixture):
        if len(prior.weights) <= MAX_EXACT_POINTS:
            return math.log(exact_cover_dirac(prior, eta, delta))
        return math.log(greedy_cover(prior.points, eta, delta, weights=prior.weights).count)
    if isinstance(prior, SparseGaussian):
        return analytic_cov_sparse(prior.n, prior.s, eta, delta)
    if isinstance(prior, GaussianMixture):
        return analytic_cov_gaussian_mixture(len(prior.weights), prior.n, prior.tau, eta, delta)
    if isinstance(prior, GenerativePushforward):
        return analytic_cov_lipschitz(prior.latent_dim, lipschitz_bound(prior), eta, delta)
    raise TypeError(f"no covering estimate for {type(prior).__name__}")


def coherence_for_prior(basis: str, prior: PriorSpec) -> float:
    """mu(U; supp P - supp P); the full space (mu = n) when no sharper value is available."""
    if isinstance(prior, PerturbedPrior):
        prior = prior.as_dirac()
    if isinstance(prior, DiracMixture):
        return coherence_of_differences(basis, prior.points)
    if isinstance(prior, SparseGaussian):
        return coherence_sparse(basis, prior.n, prior.s)
    return float(prior.n)


def wasserstein_budget(config: ExperimentConfig) -> float:
    if config.bound.eps is not None:
        return config.bound.eps
    if same_prior(config.real_prior, config.model):
        return 0.0
    if coupled_base(config):
        return wasserstein_infty_certificate(config.real_prior)
    raise ConfigError("/bound/eps", "cannot certify W(R, P); supply bound.eps")


def bound_for_m(config: ExperimentConfig, m: int) -> Optional[dict]:
    """Bound breakdown at one m (as a dict with a ``total`` entry), or None when unavailable."""
    if config.bound_mode == "none":
        return None
    op = config.operator
    if isinstance(op, Subgaussian) and op.kind != "gaussian":
        return None
    settings = config.bound
    if config.eta <= 0:
        raise ConfigError("/eta", "bounds need eta > 0")
    k = settings.k if settings.k is not None else log_cover_estimate(config.model, config.eta, settings.delta)
    mu = None if isinstance(op, Subgaussian) else coherence_for_prior(op.basis, config.model)

    if config.bound_mode == "simplified":
        d = settings.d
        if mu is None:
            c_low = bnd.gaussian_exact_conc(1.0 / d, m, "low").value
            c_upp = bnd.gaussian_exact_conc(d, m, "upp").value
        else:
            c_low = bnd.bernstein_orthog_bound(1.0 / d, m, mu, "low").value
            c_upp = bnd.bernstein_orthog_bound(d, m, mu, "upp").value
        total = bnd.theorem_simplified_expression(d, config.eta, config.sigma, settings.delta, bnd.safe_exp(k), c_low, c_upp, m)
        return {"total": total, "k": k, "mu": mu, "threshold": bnd.simplified_threshold(d, config.eta, config.sigma)}

    c = config.threshold_factor - 2.0
    if c < 1:
        raise ConfigError("/threshold_factor", "theorem_main bound needs threshold_factor >= 3")
    try:
        inputs = bnd.BoundInputs(
            delta=settings.delta, eps=wasserstein_budget(config), eta=config.eta, sigma=config.sigma,
            c=c, c_prime=settings.c_prime, t=settings.t, k=k, m=m, p_order=settings.p_order,
        )
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError("/bound", str(exc)) from None
    if mu is None:
        breakdown = bnd.gaussian_main_bound(inputs)
    else:
        breakdown = bnd.orthogonal_main_bound(inputs, mu, config.n)
    out = breakdown.to_dict()
    out.update({"k": k, "mu": mu})
    return out


# ---------------------------------------------------------------------------
# Sweeps and reports
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SweepRow:
    m: int
    trials: int
    failures: int
    p_hat: float
    wilson_low: float
    wilson_high: float
    bound_total: Optional[float]
    threshold: float
    mean_q: float
    seed: int
    resampled: int = 0
    max_coupling_gap: Optional[float] = None
    bound: Optional[dict] = None

    def csv_record(self) -> list:
        return [
            self.m, self.trials, self.failures, repr(self.p_hat), repr(self.wilson_low), repr(self.wilson_high),
            "" if self.bound_total is None else repr(self.bound_total), repr(self.threshold), repr(self.mean_q),
            self.seed,
        ]


@dataclass(frozen=True, eq=False)
class ExperimentReport:
    config: ExperimentConfig
    rows: tuple

    @property
    def seed(self) -> int:
        return self.config.master_seed

    def to_dict(self) -> dict:
        from .config import config_to_dict

        return {
            "schema": 1,
            "seed": self.seed,
            "config": config_to_dict(self.config),
            "rows": [
                {
                    "m": r.m, "trials": r.trials, "failures": r.failures, "p_hat": r.p_hat,
                    "wilson_low": r.wilson_low, "wilson_high": r.wilson_high, "bound_total": r.bound_total,
                    "threshold": r.threshold, "mean_q": r.mean_q, "seed": r.seed, "resampled": r.resampled,
                    "max_coupling_gap": r.max_coupling_gap, "bound": r.bound,
                }
                for r in self.rows
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for row in self.rows:
            writer.writerow(row.csv_record())
        return buf.getvalue()


class TrialError(RuntimeError):
    pass


def _guarded_trial(config: ExperimentConfig, m: int, index: int) -> TrialResult:
    try:
        return run_trial(config, m, index)
    except Exception as exc:  # re-raised with coordinates
        raise TrialError(f"trial failed at m={m}, trial_index={index}: {exc}") from exc


def run_sweep(config: ExperimentConfig, threads: int = 1) -> ExperimentReport:
    """Run ``config.trials`` trials at every m and aggregate.

    Results do not depend on ``threads``: every trial owns its random
    streams and aggregation runs in trial order.
    """
    if threads < 1:
        raise ValueError("threads must be >= 1")
    rows = []
    pool = ThreadPoolExecutor(max_workers=threads) if threads > 1 else None
    try:
        for m in config.m_values:
            m = int(m)
            indices = range(config.trials)
            if pool is None:
                results = [_guarded_trial(config, m, i) for i in indices]
            else:
                results = list(pool.map(lambda i: _guarded_trial(config, m, i), indices))
            failures = sum(r.failed for r in results)
            low, high = wilson_interval(failures, config.trials)
            bound = bound_for_m(config, m)
            gaps = [r.coupling_gap for r in results if r.coupling_gap is not None]
            row = SweepRow(
                m=m,
                trials=config.trials,
                failures=failures,
                p_hat=failures / config.trials,
                wilson_low=low,
                wilson_high=high,
                bound_total=None if bound is None else float(bound["total"]),
                threshold=config.threshold,
                mean_q=float(np.mean([r.q for r in results])),
                seed=config.master_seed,
                resampled=sum(r.resampled for r in results),
                max_coupling_gap=max(gaps) if gaps else None,
                bound=bound,
            )
            log.info("m=%d failures=%d/%d p_hat=%.4g bound=%s", m, failures, config.trials, row.p_hat,
                     "n/a" if row.bound_total is None else f"{row.bound_total:.4g}")
            rows.append(row)
    finally:
        if pool is not None:
            pool.shutdown()
    return ExperimentReport(config, tuple(rows))
