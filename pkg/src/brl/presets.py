"""Experiment presets used by the verification suite, the acceptance tests and the docs."""

from __future__ import annotations

import math

import numpy as np

from .experiments import BoundSettings, ExperimentConfig
from .operators import Subgaussian, SubsampledOrthogonal
from .priors import DiracMixture, SparseGaussian


def simplex_atoms(j: int, n: int, distance: float) -> np.ndarray:
    """j points in R^n with every pairwise distance equal to ``distance``."""
    if j > n:
        raise ValueError("need j <= n")
    return distance / math.sqrt(2.0) * np.eye(n)[:j]


def dirac16_gaussian(trials: int = 2000, m_values=tuple(range(5, 65, 5)), master_seed: int = 0) -> ExperimentConfig:
    """16 atoms at mutual distance 20 in R^128, Gaussian operator, error level 34 (eta + sigma).

    The attached bound uses c = 32, c' = 2, t = 2, delta = 1e-3 and the exact
    cover of the prior (16 balls, so k = log 16).
    """
    prior = DiracMixture.uniform(simplex_atoms(16, 128, 20.0))
    return ExperimentConfig(
        real_prior=prior,
        operator=Subgaussian("gaussian"),
        sigma=0.5,
        m_values=tuple(m_values),
        threshold_factor=34.0,
        eta=0.05,
        trials=trials,
        master_seed=master_seed,
        bound_mode="theorem_main",
        bound=BoundSettings(delta=1e-3, c_prime=2.0, t=2.0),
    )


def sparse_coherence(basis: str, trials: int = 2000, m: int = 60, master_seed: int = 0) -> ExperimentConfig:
    """4-sparse Gaussian signals in R^256 under subsampled ``basis`` rows.

    The error level is 0.05 (eta = 0), so a trial fails whenever part of the
    support is not recovered.
    """
    return ExperimentConfig(
        real_prior=SparseGaussian(256, 4),
        operator=SubsampledOrthogonal(basis),
        sigma=0.05,
        m_values=(m,),
        threshold_factor=1.0,
        eta=0.0,
        trials=trials,
        master_seed=master_seed,
        posterior_mode="sparse_support",
    )


PHASE_DISTANCE = 0.2


def phase_transition(j: int, trials: int = 2000, m_values=tuple(range(1, 41)), master_seed: int = 0) -> ExperimentConfig:
    """j equidistant atoms in R^128, Gaussian operator, sigma = 0.1.

    Atoms sit at mutual distance 0.2 and the error level 1.5 (eta + sigma) =
    0.165 lies below it, so a failure means the posterior picked the wrong atom.
    """
    return ExperimentConfig(
        real_prior=DiracMixture.uniform(simplex_atoms(j, 128, PHASE_DISTANCE)),
        operator=Subgaussian("gaussian"),
        sigma=0.1,
        m_values=tuple(m_values),
        threshold_factor=1.5,
        eta=0.01,
        trials=trials,
        master_seed=master_seed,
    )


PRESETS = {
    "dirac16-gaussian": dirac16_gaussian,
    "sparse-identity": lambda **kw: sparse_coherence("identity", **kw),
    "sparse-hadamard": lambda **kw: sparse_coherence("hadamard", **kw),
}
