"""Recovery-probability experiments for Bayesian posterior sampling in linear inverse problems.

Submodules: numerics, priors, operators, noise, covering, concentration,
posterior, bounds, experiments, config, verify, cli.
"""

from .errors import ConfigError, ConvergenceError

__version__ = "0.1.0"

__all__ = ["ConfigError", "ConvergenceError", "__version__"]
