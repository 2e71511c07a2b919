"""Shared numeric kernel: special functions, orthonormal transforms, random streams."""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, replace

import numpy as np
from scipy import fft as _fft

from .errors import ConvergenceError

_MASK64 = (1 << 64) - 1
_GAMMA_EPS = 1e-15
_GAMMA_MAX_ITER = 10_000


# ---------------------------------------------------------------------------
# Random streams
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RandomStream:
    """Coordinates of a counter-based random stream.

    Backed by numpy's Philox bit generator, keyed by ``(master_seed, stream_id)``.
    ``counter`` selects a block offset in the high words of the Philox counter,
    so every (master_seed, stream_id, counter) triple names a fixed sequence
    that does not depend on platform or scheduling.
    """

    master_seed: int
    stream_id: int = 0
    counter: int = 0

    def __post_init__(self):
        for name in ("master_seed", "stream_id", "counter"):
            value = getattr(self, name)
            if not 0 <= int(value) <= _MASK64:
                raise ValueError(f"{name} must be a 64-bit unsigned integer, got {value}")

    def generator(self) -> np.random.Generator:
        key = (int(self.stream_id) << 64) | int(self.master_seed)
        bitgen = np.random.Philox(key=key, counter=int(self.counter) << 128)
        return np.random.Generator(bitgen)

    def advance(self, steps: int = 1) -> "RandomStream":
        return replace(self, counter=(self.counter + steps) & _MASK64)

    def child(self, *labels) -> "RandomStream":
        """Stream whose id is derived from this stream's id and ``labels``."""
        return RandomStream(self.master_seed, derive_stream_id(self.stream_id, *labels), 0)


def derive_stream_id(*labels) -> int:
    """Hash arbitrary labels into a 64-bit stream id (stable across runs and platforms)."""
    text = "\x1f".join(repr(label) for label in labels).encode("utf-8")
    return int.from_bytes(hashlib.blake2b(text, digest_size=8).digest(), "little")


def as_generator(stream) -> np.random.Generator:
    """Accept a RandomStream or an existing Generator."""
    if isinstance(stream, np.random.Generator):
        return stream
    if isinstance(stream, RandomStream):
        return stream.generator()
    raise TypeError(f"expected RandomStream or numpy Generator, got {type(stream).__name__}")


def draw_gaussian(stream, n: int) -> np.ndarray:
    if n < 1:
        raise ValueError("n must be >= 1")
    return as_generator(stream).standard_normal(n)


def draw_rademacher(stream, n: int) -> np.ndarray:
    if n < 1:
        raise ValueError("n must be >= 1")
    bits = as_generator(stream).integers(0, 2, size=n)
    return 2.0 * bits - 1.0


# ---------------------------------------------------------------------------
# Special functions
# ---------------------------------------------------------------------------


def std_normal_cdf(x: float) -> float:
    if math.isnan(x):
        raise ValueError("x must not be NaN")
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


def _gamma_p_series(a: float, x: float) -> float:
    # P(a, x) = x^a e^{-x} / Gamma(a+1) * sum_k x^k / ((a+1)...(a+k))
    term = 1.0 / a
    total = term
    ap = a
    for _ in range(_GAMMA_MAX_ITER):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * _GAMMA_EPS:
            break
    else:
        raise ArithmeticError(f"incomplete gamma series did not converge (a={a}, x={x})")
    return total * math.exp(-x + a * math.log(x) - math.lgamma(a))


def _gamma_q_contfrac(a: float, x: float) -> float:
    # Modified Lentz evaluation of the continued fraction for Q(a, x).
    tiny = 1e-300
    b = x + 1.0 - a
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, _GAMMA_MAX_ITER):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < tiny:
            d = tiny
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _GAMMA_EPS:
            break
    else:
        raise ArithmeticError(f"incomplete gamma continued fraction did not converge (a={a}, x={x})")
    return math.exp(-x + a * math.log(x) - math.lgamma(a)) * h


def regularized_gamma_p(a: float, x: float) -> float:
    """Regularized lower incomplete gamma function P(a, x)."""
    if a <= 0:
        raise ValueError("a must be positive")
    if x < 0:
        raise ValueError("x must be nonnegative")
    if x == 0:
        return 0.0
    if math.isinf(x):
        return 1.0
    if x < a + 1.0:
        return min(1.0, _gamma_p_series(a, x))
    return max(0.0, 1.0 - _gamma_q_contfrac(a, x))


def regularized_gamma_q(a: float, x: float) -> float:
    """Upper counterpart 1 - P(a, x), evaluated without cancellation in the tail."""
    if a <= 0:
        raise ValueError("a must be positive")
    if x < 0:
        raise ValueError("x must be nonnegative")
    if x == 0:
        return 1.0
    if math.isinf(x):
        return 0.0
    if x < a + 1.0:
        return max(0.0, 1.0 - _gamma_p_series(a, x))
    return min(1.0, _gamma_q_contfrac(a, x))


def chi_square_cdf(x: float, dof: int) -> float:
    if dof < 1 or int(dof) != dof:
        raise ValueError("dof must be a positive integer")
    if x < 0:
        raise ValueError("x must be nonnegative")
    return regularized_gamma_p(dof / 2.0, x / 2.0)


def chi_square_sf(x: float, dof: int) -> float:
    """Survival function 1 - chi_square_cdf, accurate far into the upper tail."""
    if dof < 1 or int(dof) != dof:
        raise ValueError("dof must be a positive integer")
    if x < 0:
        raise ValueError("x must be nonnegative")
    return regularized_gamma_q(dof / 2.0, x / 2.0)


def spectral_norm(matrix, tol: float = 1e-6, max_iter: int = 10_000) -> float:
    """Largest singular value by power iteration on W^T W.

    Iterates until the relative change of the estimate drops below ``tol**2``,
    comfortably inside the requested relative accuracy ``tol``.
    """
    w = np.asarray(matrix, dtype=float)
    if not np.any(w):
        return 0.0
    gram = w.T @ w
    # Deterministic start with weight on every coordinate.
    v = np.linspace(1.0, 2.0, gram.shape[0])
    v /= np.linalg.norm(v)
    estimate = 0.0
    for _ in range(max_iter):
        u = gram @ v
        norm_u = np.linalg.norm(u)
        if norm_u == 0.0:
            return 0.0
        new = math.sqrt(float(v @ u))
        v = u / norm_u
        if abs(new - estimate) <= tol * tol * new:
            return new
        estimate = new
    raise ConvergenceError(f"power iteration did not converge in {max_iter} iterations")


# ---------------------------------------------------------------------------
# Orthonormal transforms (act on the last axis)
# ---------------------------------------------------------------------------


def is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


def fwht_ortho(v) -> np.ndarray:
    """Orthonormal (Sylvester-ordered) Walsh-Hadamard transform along the last axis."""
    x = np.array(v, dtype=float, copy=True)
    n = x.shape[-1]
    if not is_power_of_two(n):
        raise ValueError(f"Hadamard transform needs a power-of-two length, got {n}")
    lead = x.shape[:-1]
    h = 1
    while h < n:
        x = x.reshape(*lead, n // (2 * h), 2, h)
        a = x[..., 0, :]
        b = x[..., 1, :]
        x = np.stack((a + b, a - b), axis=-2)
        h *= 2
    return x.reshape(*lead, n) / math.sqrt(n)


def dct_ortho(v) -> np.ndarray:
    """Orthonormal DCT-II along the last axis."""
    x = np.asarray(v, dtype=float)
    if x.shape[-1] < 1:
        raise ValueError("DCT needs at least one entry")
    return _fft.dct(x, type=2, norm="ortho", axis=-1)


def idct_ortho(v) -> np.ndarray:
    x = np.asarray(v, dtype=float)
    return _fft.idct(x, type=2, norm="ortho", axis=-1)


BASES = ("identity", "hadamard", "dct")


def check_basis(basis: str, n: int) -> None:
    if basis not in BASES:
        raise ValueError(f"unknown basis {basis!r}; expected one of {BASES}")
    if n < 1:
        raise ValueError("n must be >= 1")
    if basis == "hadamard" and not is_power_of_two(n):
        raise ValueError(f"hadamard basis requires n to be a power of two, got {n}")


def basis_transform(basis: str, v) -> np.ndarray:
    """Apply U (the orthogonal matrix of ``basis``) along the last axis."""
    x = np.asarray(v, dtype=float)
    check_basis(basis, x.shape[-1])
    if basis == "identity":
        return x.copy()
    if basis == "hadamard":
        return fwht_ortho(x)
    return dct_ortho(x)


def basis_transform_transpose(basis: str, v) -> np.ndarray:
    """Apply U^T along the last axis."""
    x = np.asarray(v, dtype=float)
    check_basis(basis, x.shape[-1])
    if basis == "identity":
        return x.copy()
    if basis == "hadamard":
        return fwht_ortho(x)
    return idct_ortho(x)


def basis_matrix(basis: str, n: int) -> np.ndarray:
    """Dense U whose rows are u_1..u_n."""
    check_basis(basis, n)
    # Column j of U is U e_j, so transforming the identity row-wise yields U^T.
    return basis_transform(basis, np.eye(n)).T
