"""Forward-operator distributions, realized operators and coherence."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .errors import ConfigError
from .numerics import (
    as_generator,
    basis_matrix,
    basis_transform,
    basis_transform_transpose,
    check_basis,
    spectral_norm,
)
from .priors import sample_prior_batch


@dataclass(frozen=True)
class Subgaussian:
    kind: str = "gaussian"

    def __post_init__(self):
        if self.kind not in ("gaussian", "rademacher"):
            raise ConfigError("/kind", f"unknown subgaussian kind {self.kind!r}")


@dataclass(frozen=True)
class SubsampledOrthogonal:
    basis: str = "dct"

    def __post_init__(self):
        if self.basis not in ("identity", "hadamard", "dct"):
            raise ConfigError("/basis", f"unknown basis {self.basis!r}")


OperatorSpec = Union[Subgaussian, SubsampledOrthogonal]


@dataclass(frozen=True, eq=False)
class DrawnOperator:
    """A realized forward operator.

    Dense operators store their matrix. Subsampled operators store the basis
    name, the kept row indices and the scale sqrt(n/m); they are applied with
    the fast transform. ``resampled`` counts discarded empty (q = 0) draws.
    """

    n: int
    m: int
    matrix: Optional[np.ndarray] = None
    basis: Optional[str] = None
    rows: Optional[np.ndarray] = None
    scale: float = 1.0
    resampled: int = 0

    @property
    def is_subsampled(self) -> bool:
        return self.rows is not None

    @property
    def q(self) -> int:
        return len(self.rows) if self.is_subsampled else self.matrix.shape[0]

    def apply(self, x) -> np.ndarray:
        """A x, along the last axis of ``x``."""
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.n:
            raise ValueError(f"dimension mismatch: operator has n={self.n}, input has {x.shape[-1]}")
        if self.is_subsampled:
            return self.scale * basis_transform(self.basis, x)[..., self.rows]
        return x @ self.matrix.T

    def apply_transpose(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        if y.shape[-1] != self.q:
            raise ValueError(f"dimension mismatch: operator has q={self.q}, input has {y.shape[-1]}")
        if self.is_subsampled:
            full = np.zeros(y.shape[:-1] + (self.n,))
            full[..., self.rows] = y
            return self.scale * basis_transform_transpose(self.basis, full)
        return y @ self.matrix

    def to_dense(self) -> np.ndarray:
        if self.is_subsampled:
            return self.scale * basis_matrix(self.basis, self.n)[self.rows]
        return self.matrix.copy()


def dense_operator(matrix, m: Optional[int] = None) -> DrawnOperator:
    mat = np.asarray(matrix, dtype=float)
    return DrawnOperator(n=mat.shape[1], m=mat.shape[0] if m is None else m, matrix=mat)


def draw_operator(spec: OperatorSpec, m: int, n: int, stream) -> DrawnOperator:
    rng = as_generator(stream)
    if m < 1 or n < 1:
        raise ValueError("m and n must be >= 1")
    if isinstance(spec, Subgaussian):
        if spec.kind == "gaussian":
            raw = rng.standard_normal((m, n))
        else:
            raw = 2.0 * rng.integers(0, 2, size=(m, n)) - 1.0
        return DrawnOperator(n=n, m=m, matrix=raw / math.sqrt(m))
    if isinstance(spec, SubsampledOrthogonal):
        if m > n:
            raise ValueError(f"subsampled operators need m <= n, got m={m}, n={n}")
        check_basis(spec.basis, n)
        resampled = 0
        rows = np.flatnonzero(rng.random(n) < m / n)
        if rows.size == 0:
            resampled = 1
            rows = np.flatnonzero(rng.random(n) < m / n)
            if rows.size == 0:
                raise RuntimeError(f"two consecutive empty row selections (m={m}, n={n})")
        return DrawnOperator(n=n, m=m, basis=spec.basis, rows=rows, scale=math.sqrt(n / m),
                             resampled=resampled)
    raise TypeError(f"unsupported operator spec {type(spec).__name__}")


def op_norm_bound(op: DrawnOperator) -> float:
    """sqrt(n/m) for subsampled operators (almost-sure bound); power iteration otherwise."""
    if op.is_subsampled:
        return math.sqrt(op.n / op.m)
    return spectral_norm(op.matrix)


# ---------------------------------------------------------------------------
# Coherence
# ---------------------------------------------------------------------------


def mu_star(basis: str, n: int) -> float:
    u = basis_matrix(basis, n)
    return float(n * np.max(u**2))


def coherence_sparse(basis: str, n: int, s: int) -> float:
    """Exact coherence of U relative to the (2s)-sparse vectors.

    For x supported on S the ratio <u_i, x>^2 / ||x||^2 peaks at ||(u_i)_S||^2,
    so the supremum is n times the largest top-2s row energy.
    """
    if s < 1 or 2 * s > n:
        raise ValueError(f"need 1 <= 2s <= n, got s={s}, n={n}")
    sq = np.sort(basis_matrix(basis, n) ** 2, axis=1)[:, ::-1]
    return float(n * np.max(sq[:, : 2 * s].sum(axis=1)))


def coherence_of_differences(basis: str, points) -> float:
    """Exact coherence relative to {x_i - x_j} for a finite point set."""
    pts = np.asarray(points, dtype=float)
    n = pts.shape[1]
    i, j = np.triu_indices(len(pts), k=1)
    diffs = pts[i] - pts[j]
    norms2 = np.sum(diffs**2, axis=1)
    keep = norms2 > 1e-24
    if not np.any(keep):
        raise ValueError("all pairwise differences vanish")
    transformed = basis_transform(basis, diffs[keep])
    return float(n * np.max(np.max(transformed**2, axis=1) / norms2[keep]))


def coherence_empirical(basis: str, n: int, prior, n_pairs: int, stream) -> float:
    """Lower estimate of mu(U; supp(P) - supp(P)) from sampled pairs."""
    if n_pairs < 1:
        raise ValueError("n_pairs must be >= 1")
    check_basis(basis, n)
    rng = as_generator(stream)
    first = sample_prior_batch(prior, rng, n_pairs)
    second = sample_prior_batch(prior, rng, n_pairs)
    diffs = first - second
    norms2 = np.sum(diffs**2, axis=1)
    keep = np.sqrt(norms2) >= 1e-12
    if not np.any(keep):
        raise ValueError("every sampled pair was degenerate (||x1 - x2|| < 1e-12)")
    transformed = basis_transform(basis, diffs[keep])
    return float(n * np.max(np.max(transformed**2, axis=1) / norms2[keep]))


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def operator_to_dict(spec: OperatorSpec) -> dict:
    if isinstance(spec, Subgaussian):
        return {"type": "subgaussian", "kind": spec.kind}
    return {"type": "subsampled_orthogonal", "basis": spec.basis}


def operator_from_dict(data, path: str = "") -> OperatorSpec:
    if not isinstance(data, dict):
        raise ConfigError(path, "operator must be a JSON object")
    kind = data.get("type")
    allowed = {"subgaussian": {"type", "kind"}, "subsampled_orthogonal": {"type", "basis"}}
    if kind not in allowed:
        raise ConfigError(f"{path}/type", f"unknown operator type {kind!r}")
    unknown = set(data) - allowed[kind]
    if unknown:
        raise ConfigError(f"{path}/{sorted(unknown)[0]}", "unknown key")
    try:
        if kind == "subgaussian":
            return Subgaussian(data.get("kind", "gaussian"))
        return SubsampledOrthogonal(data.get("basis", "dct"))
    except ConfigError as exc:
        raise exc.under(path) from None
