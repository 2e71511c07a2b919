"""Explicit failure-probability bounds and measurement conditions.

``theorem_main_bound`` assembles the general bound from user-supplied
constants. The ``*_constants`` helpers fill those constants in exactly for
Gaussian operators and via Bernstein for subsampled orthogonal ones.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Optional

from .concentration import bernstein_orthog_bound, gaussian_exact_conc
from .noise import NoiseSpec, d_shift, d_upp
from .numerics import std_normal_cdf


@dataclass(frozen=True)
class BoundInputs:
    delta: float
    eps: float
    eta: float
    sigma: float
    c: float
    c_prime: float
    t: float
    k: float
    m: int
    p_order: float = math.inf
    d: Optional[float] = None

    def __post_init__(self):
        if not 0 < self.delta <= 0.25:
            raise ValueError(f"delta must lie in (0, 1/4], got {self.delta}")
        if self.eps < 0:
            raise ValueError("eps must be nonnegative")
        if not self.eta > 0 or not self.sigma > 0 or not self.t > 0:
            raise ValueError("eta, sigma and t must be positive")
        if self.c < 1 or self.c_prime < 1:
            raise ValueError("c and c_prime must be >= 1")
        if self.p_order < 1:
            raise ValueError("p_order must be >= 1")
        if self.m < 1:
            raise ValueError("m must be >= 1")
        if self.d is not None and self.d < 2:
            raise ValueError("d must be >= 2")
        if self.sigma < self.eps_prime * (1 - 1e-12):
            raise ValueError(f"sigma={self.sigma} below eps/delta^(1/p)={self.eps_prime}")

    @property
    def eps_prime(self) -> float:
        """eps / delta^(1/p), with delta^(1/inf) = 1."""
        if math.isinf(self.p_order):
            return self.eps
        return self.eps / self.delta ** (1.0 / self.p_order)

    @property
    def threshold(self) -> float:
        return (self.c + 2.0) * (self.eta + self.sigma)


@dataclass(frozen=True)
class BoundBreakdown:
    term_2delta: float
    term_c_abs: float
    term_d_upp_cprime: float
    term_shift_factor: float
    term_exp_k: float
    term_c_low: float
    term_c_upp: float
    term_d_upp_inner: float
    total: float
    total_clamped: float
    threshold: float

    def to_dict(self) -> dict:
        return asdict(self)


def safe_exp(x: float) -> float:
    try:
        return math.exp(x)
    except OverflowError:
        return math.inf


def _probability(name: str, value: float) -> float:
    if not 0.0 <= value <= 1.0:
        raise ValueError(f"{name} must lie in [0, 1], got {value}")
    return float(value)


def theorem_main_bound(inputs: BoundInputs, c_abs: float, d_upp_outer: float, d_shift_value: float,
                       c_low: float, c_upp: float, d_upp_inner: float) -> BoundBreakdown:
    """2 delta + C_abs + D_upp(c' sigma) + 2 D_shift e^k [C_low + C_upp + 2 D_upp(inner)].

    The probability refers to ||x* - x_hat|| >= (c + 2)(eta + sigma).
    """
    c_abs = _probability("c_abs", c_abs)
    d_upp_outer = _probability("d_upp_outer", d_upp_outer)
    c_low = _probability("c_low", c_low)
    c_upp = _probability("c_upp", c_upp)
    d_upp_inner = _probability("d_upp_inner", d_upp_inner)
    if not d_shift_value >= 1.0:
        raise ValueError(f"d_shift must be >= 1, got {d_shift_value}")
    exp_k = safe_exp(inputs.k)
    bracket = c_low + c_upp + 2.0 * d_upp_inner
    # an infinite factor times a vanishing bracket contributes nothing
    shifted = 2.0 * d_shift_value * exp_k * bracket if bracket > 0 else 0.0
    total = 2.0 * inputs.delta + c_abs + d_upp_outer + shifted
    return BoundBreakdown(
        term_2delta=2.0 * inputs.delta,
        term_c_abs=c_abs,
        term_d_upp_cprime=d_upp_outer,
        term_shift_factor=float(d_shift_value),
        term_exp_k=exp_k,
        term_c_low=c_low,
        term_c_upp=c_upp,
        term_d_upp_inner=d_upp_inner,
        total=total,
        total_clamped=min(1.0, max(0.0, total)),
        threshold=inputs.threshold,
    )


def _inner_arguments(inputs: BoundInputs):
    root_c = math.sqrt(inputs.c)
    return 2.0 * math.sqrt(2.0) / root_c, root_c / (2.0 * math.sqrt(2.0)), root_c * inputs.sigma / (2.0 * math.sqrt(2.0))


def _noise_terms(inputs: BoundInputs):
    noise = NoiseSpec(inputs.sigma, inputs.m)
    eps_p = inputs.eps_prime
    _, _, inner_radius = _inner_arguments(inputs)
    return (
        d_upp(noise, inputs.c_prime * inputs.sigma),
        d_shift(noise, inputs.t * eps_p, inputs.c_prime * inputs.sigma),
        d_upp(noise, inner_radius),
    )


def gaussian_constants(inputs: BoundInputs) -> dict:
    """Exact constants for an operator with i.i.d. N(0, 1/m) entries.

    C_abs(eps', t eps') reduces to C_upp(t) because the event depends on x
    only through ||x||, and the worst case is ||x|| = eps'.
    """
    low_arg, upp_arg, _ = _inner_arguments(inputs)
    d_outer, shift, d_inner = _noise_terms(inputs)
    c_abs = 0.0 if inputs.eps_prime == 0 else gaussian_exact_conc(inputs.t, inputs.m, "upp").value
    return {
        "c_abs": c_abs,
        "d_upp_outer": d_outer,
        "d_shift_value": shift,
        "c_low": gaussian_exact_conc(low_arg, inputs.m, "low").value,
        "c_upp": gaussian_exact_conc(upp_arg, inputs.m, "upp").value,
        "d_upp_inner": d_inner,
    }


def orthogonal_constants(inputs: BoundInputs, mu: float, n: int) -> dict:
    """Bernstein constants for a subsampled orthogonal operator with coherence ``mu``.

    C_abs vanishes when eps' = 0 or t >= sqrt(n/m); otherwise no explicit
    bound is available and the trivial value 1 is used.
    """
    low_arg, upp_arg, _ = _inner_arguments(inputs)
    d_outer, shift, d_inner = _noise_terms(inputs)
    if inputs.eps_prime == 0 or inputs.t >= math.sqrt(n / inputs.m):
        c_abs = 0.0
    else:
        c_abs = 1.0
    # c <= 8 puts both arguments on the wrong side of 1; the bound is then vacuous.
    c_low = bernstein_orthog_bound(low_arg, inputs.m, mu, "low").value if low_arg < 1 else 1.0
    c_upp = bernstein_orthog_bound(upp_arg, inputs.m, mu, "upp").value if upp_arg > 1 else 1.0
    return {
        "c_abs": c_abs,
        "d_upp_outer": d_outer,
        "d_shift_value": shift,
        "c_low": c_low,
        "c_upp": c_upp,
        "d_upp_inner": d_inner,
    }


def gaussian_main_bound(inputs: BoundInputs) -> BoundBreakdown:
    return theorem_main_bound(inputs, **gaussian_constants(inputs))


def orthogonal_main_bound(inputs: BoundInputs, mu: float, n: int) -> BoundBreakdown:
    return theorem_main_bound(inputs, **orthogonal_constants(inputs, mu, n))


def theorem_simplified_expression(d: float, eta: float, sigma: float, delta: float, cov_count: float,
                                  c_low: float, c_upp: float, m: int) -> float:
    """delta + Cov (C_low(1/d) + C_upp(d) + e^{-m/16}).

    The simplified statement holds only up to a universal constant, so this
    value is a diagnostic expression, not a certified probability bound.
    ``eta`` and ``sigma`` only set the error level (8 d^2 + 2)(eta + sigma)
    the expression refers to.
    """
    if d < 2:
        raise ValueError("d must be >= 2")
    return delta + cov_count * (c_low + c_upp + math.exp(-m / 16.0))


def simplified_threshold(d: float, eta: float, sigma: float) -> float:
    return (8.0 * d * d + 2.0) * (eta + sigma)


def _log_inv_delta(delta: float) -> float:
    if not 0 < delta <= 1:
        raise ValueError("delta must lie in (0, 1]")
    return math.log(1.0 / delta)


def m_condition_subgauss(k_cov_log: float, delta: float, c_const: float = 8.0) -> int:
    """ceil(c (log Cov + log(1/delta))); the constant is user-supplied."""
    if not c_const > 0:
        raise ValueError("c_const must be positive")
    return math.ceil(c_const * (k_cov_log + _log_inv_delta(delta)) - 1e-12)


def m_condition_orthog(cov_log: float, delta: float, mu: float, c_const: float = 8.0) -> int:
    if mu < 1:
        raise ValueError("mu must be >= 1")
    if not c_const > 0:
        raise ValueError("c_const must be positive")
    return math.ceil(c_const * mu * (cov_log + _log_inv_delta(delta)) - 1e-12)


def tv_gaussian_shift(delta_param: float) -> float:
    """Total variation between N(a, s^2 I) and N(b, s^2 I) with ||a - b|| / s = delta_param."""
    if delta_param < 0:
        raise ValueError("delta_param must be nonnegative")
    if delta_param == 0:
        return 0.0
    # 2 Phi(x) - 1 = 1 - 2 Phi(-x), written to keep precision near 1.
    return 1.0 - 2.0 * std_normal_cdf(-delta_param / 2.0)


def tv_separation_lower_bound(c: float, c_low: float, c_upp: float, d_upp_inner: float) -> float:
    """1 - [C_low(2/sqrt c) + C_upp(sqrt c / 2) + 2 D_upp(sqrt c sigma / 2)], floored at 0."""
    if c < 1:
        raise ValueError("c must be >= 1")
    for name, value in (("c_low", c_low), ("c_upp", c_upp), ("d_upp_inner", d_upp_inner)):
        _probability(name, value)
    return max(0.0, 1.0 - (c_low + c_upp + 2.0 * d_upp_inner))


def tv_separation_gaussian_constants(c: float, sigma: float, m: int) -> dict:
    noise = NoiseSpec(sigma, m)
    root_c = math.sqrt(c)
    return {
        "c_low": gaussian_exact_conc(2.0 / root_c, m, "low").value,
        "c_upp": gaussian_exact_conc(root_c / 2.0, m, "upp").value,
        "d_upp_inner": d_upp(noise, root_c * sigma / 2.0),
    }
