"""Prior distributions on R^n: samplers, support metadata and closeness certificates."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .errors import ConfigError
from .numerics import RandomStream, as_generator, spectral_norm

WEIGHT_TOL = 1e-12


def _check_weights(weights, count: int, path: str = "/weights") -> np.ndarray:
    w = np.asarray(weights, dtype=float)
    if w.shape != (count,):
        raise ConfigError(path, f"expected {count} weights, got shape {w.shape}")
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise ConfigError(path, "weights must be finite and nonnegative")
    residual = float(w.sum() - 1.0)
    if abs(residual) > WEIGHT_TOL:
        raise ConfigError(path, f"weights must sum to 1 (residual {residual:+.3e})")
    return w


def _as_points(points, path: str) -> np.ndarray:
    arr = np.asarray(points, dtype=float)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ConfigError(path, "expected a nonempty list of equal-length vectors")
    if not np.all(np.isfinite(arr)):
        raise ConfigError(path, "entries must be finite")
    return arr


@dataclass(frozen=True, eq=False)
class DiracMixture:
    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        pts = _as_points(self.points, "/points")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", _check_weights(self.weights, pts.shape[0]))

    @classmethod
    def uniform(cls, points) -> "DiracMixture":
        pts = np.asarray(points, dtype=float)
        return cls(pts, np.full(pts.shape[0], 1.0 / pts.shape[0]))

    @property
    def n(self) -> int:
        return self.points.shape[1]


@dataclass(frozen=True, eq=False)
class GaussianMixture:
    """Mixture of isotropic Gaussians N(mean_i, tau^2 I)."""

    means: np.ndarray
    tau: float
    weights: np.ndarray

    def __post_init__(self):
        means = _as_points(self.means, "/means")
        object.__setattr__(self, "means", means)
        if not self.tau > 0:
            raise ConfigError("/tau", "tau must be positive")
        object.__setattr__(self, "tau", float(self.tau))
        object.__setattr__(self, "weights", _check_weights(self.weights, means.shape[0]))

    @property
    def n(self) -> int:
        return self.means.shape[1]


@dataclass(frozen=True)
class SparseGaussian:
    """Uniformly random size-s support, i.i.d. N(0, 1) values on it."""

    n: int
    s: int

    def __post_init__(self):
        if self.n < 1:
            raise ConfigError("/n", "n must be >= 1")
        if not 1 <= self.s <= self.n:
            raise ConfigError("/s", f"need 1 <= s <= n, got s={self.s}, n={self.n}")


@dataclass(frozen=True, eq=False)
class GenerativePushforward:
    """G(z) for z ~ N(0, I_k), G a tanh network with fixed-seed Gaussian weights.

    Hidden layers apply tanh; the output layer is linear. ``weights`` may be
    given explicitly (list of out x in matrices) instead of drawn from the seed.
    """

    latent_dim: int
    widths: tuple
    weight_seed: int = 0
    weights: Optional[tuple] = field(default=None, repr=False)

    def __post_init__(self):
        if self.latent_dim < 1:
            raise ConfigError("/latent_dim", "latent_dim must be >= 1")
        widths = tuple(int(w) for w in self.widths)
        if not widths or min(widths) < 1:
            raise ConfigError("/widths", "widths must be a nonempty list of positive sizes")
        object.__setattr__(self, "widths", widths)
        if self.weights is None:
            mats = _generate_weights(self.latent_dim, widths, int(self.weight_seed))
        else:
            mats = tuple(np.asarray(w, dtype=float) for w in self.weights)
            fan_in = self.latent_dim
            for i, (w, out) in enumerate(zip(mats, widths)):
                if w.shape != (out, fan_in):
                    raise ConfigError(f"/weights/{i}", f"expected shape {(out, fan_in)}, got {w.shape}")
                fan_in = out
            if len(mats) != len(widths):
                raise ConfigError("/weights", "need one matrix per layer")
        object.__setattr__(self, "weights", mats)

    @property
    def n(self) -> int:
        return self.widths[-1]

    def __call__(self, z) -> np.ndarray:
        h = np.asarray(z, dtype=float)
        last = len(self.weights) - 1
        for i, w in enumerate(self.weights):
            h = h @ w.T
            if i < last:
                h = np.tanh(h)
        return h


def _generate_weights(latent_dim: int, widths: tuple, seed: int) -> tuple:
    rng = RandomStream(seed).child("generative-weights").generator()
    mats = []
    fan_in = latent_dim
    for out in widths:
        mats.append(rng.standard_normal((out, fan_in)) / math.sqrt(fan_in))
        fan_in = out
    return tuple(mats)


@dataclass(frozen=True, eq=False)
class PerturbedPrior:
    """Dirac mixture whose i-th atom is shifted by offsets[i], with every shift of norm <= eps."""

    base: DiracMixture
    offsets: np.ndarray
    eps: float

    def __post_init__(self):
        if not isinstance(self.base, DiracMixture):
            raise ConfigError("/base", "base must be a DiracMixture")
        offsets = np.asarray(self.offsets, dtype=float)
        if offsets.shape != self.base.points.shape:
            raise ConfigError("/offsets", f"expected shape {self.base.points.shape}, got {offsets.shape}")
        if not self.eps >= 0:
            raise ConfigError("/eps", "eps must be nonnegative")
        norms = np.linalg.norm(offsets, axis=1)
        worst = int(np.argmax(norms))
        if norms[worst] > self.eps * (1 + 1e-12) + 1e-15:
            raise ConfigError(f"/offsets/{worst}", f"offset norm {norms[worst]:.6g} exceeds eps={self.eps}")
        object.__setattr__(self, "offsets", offsets)
        object.__setattr__(self, "eps", float(self.eps))

    @property
    def n(self) -> int:
        return self.base.n

    @property
    def points(self) -> np.ndarray:
        return self.base.points + self.offsets

    @property
    def weights(self) -> np.ndarray:
        return self.base.weights

    def as_dirac(self) -> DiracMixture:
        return DiracMixture(self.points, self.weights)


PriorSpec = Union[DiracMixture, GaussianMixture, SparseGaussian, GenerativePushforward, PerturbedPrior]


# ---------------------------------------------------------------------------
# Sampling
# ---------------------------------------------------------------------------


def sample_index(weights: np.ndarray, rng: np.random.Generator) -> int:
    cdf = np.cumsum(weights)
    return int(min(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"), len(weights) - 1))


def sample_prior(spec: PriorSpec, stream) -> np.ndarray:
    """Draw one vector from ``spec``."""
    rng = as_generator(stream)
    if isinstance(spec, DiracMixture):
        return spec.points[sample_index(spec.weights, rng)].copy()
    if isinstance(spec, PerturbedPrior):
        i = sample_index(spec.weights, rng)
        return spec.base.points[i] + spec.offsets[i]
    if isinstance(spec, GaussianMixture):
        i = sample_index(spec.weights, rng)
        return spec.means[i] + spec.tau * rng.standard_normal(spec.n)
    if isinstance(spec, SparseGaussian):
        x = np.zeros(spec.n)
        support = rng.choice(spec.n, size=spec.s, replace=False)
        x[np.sort(support)] = rng.standard_normal(spec.s)
        return x
    if isinstance(spec, GenerativePushforward):
        return spec(rng.standard_normal(spec.latent_dim))
    raise TypeError(f"unsupported prior {type(spec).__name__}")


def sample_prior_batch(spec: PriorSpec, stream, size: int) -> np.ndarray:
    """``size`` independent draws as rows of a matrix."""
    rng = as_generator(stream)
    if isinstance(spec, (DiracMixture, PerturbedPrior)):
        idx = rng.choice(len(spec.weights), size=size, p=spec.weights)
        return spec.points[idx]
    if isinstance(spec, GaussianMixture):
        idx = rng.choice(len(spec.weights), size=size, p=spec.weights)
        return spec.means[idx] + spec.tau * rng.standard_normal((size, spec.n))
    if isinstance(spec, GenerativePushforward):
        return spec(rng.standard_normal((size, spec.latent_dim)))
    return np.stack([sample_prior(spec, rng) for _ in range(size)])


def sample_coupled(spec: PerturbedPrior, stream) -> tuple:
    """Jointly draw (base atom, perturbed atom, index) under the identity coupling."""
    rng = as_generator(stream)
    i = sample_index(spec.weights, rng)
    base = spec.base.points[i].copy()
    return base, base + spec.offsets[i], i


# ---------------------------------------------------------------------------
# Support metadata
# ---------------------------------------------------------------------------


def pairwise_distances(points) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    sq = np.sum(pts**2, axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * pts @ pts.T
    np.maximum(d2, 0.0, out=d2)
    d = np.sqrt(d2)
    # Exact recomputation for near-coincident pairs, where cancellation dominates.
    close = d < 1e-6 * (1.0 + np.sqrt(np.maximum(sq[:, None], sq[None, :])))
    for i, j in zip(*np.nonzero(close)):
        d[i, j] = np.linalg.norm(pts[i] - pts[j])
    return d


def min_separation(spec: DiracMixture) -> float:
    pts = spec.points
    if pts.shape[0] < 2:
        raise ValueError("min_separation needs at least 2 points")
    return min(float(np.linalg.norm(pts[i] - pts[j])) for i, j in itertools.combinations(range(len(pts)), 2))


def lipschitz_bound(spec: GenerativePushforward, tol: float = 1e-6) -> float:
    """Product of layer spectral norms; tanh is 1-Lipschitz so this bounds Lip(G)."""
    return float(np.prod([spectral_norm(w, tol) for w in spec.weights]))


def wasserstein_infty_certificate(spec: PerturbedPrior) -> float:
    """max_i ||offset_i||: bounds W_inf (hence every W_p) between base and perturbed mixtures."""
    return float(np.max(np.linalg.norm(spec.offsets, axis=1)))


def support_points(spec: PriorSpec) -> Optional[np.ndarray]:
    if isinstance(spec, DiracMixture):
        return spec.points
    if isinstance(spec, PerturbedPrior):
        return spec.points
    return None


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

_PRIOR_KEYS = {
    "dirac": {"type", "points", "weights"},
    "gaussian_mixture": {"type", "means", "tau", "weights"},
    "sparse_gaussian": {"type", "n", "s"},
    "generative": {"type", "latent_dim", "widths", "weight_seed", "weights"},
    "perturbed": {"type", "base", "offsets", "eps"},
}
_REQUIRED = {
    "dirac": {"points", "weights"},
    "gaussian_mixture": {"means", "tau", "weights"},
    "sparse_gaussian": {"n", "s"},
    "generative": {"latent_dim", "widths"},
    "perturbed": {"base", "offsets", "eps"},
}


def prior_to_dict(spec: PriorSpec) -> dict:
    if isinstance(spec, DiracMixture):
        return {"type": "dirac", "points": spec.points.tolist(), "weights": spec.weights.tolist()}
    if isinstance(spec, GaussianMixture):
        return {"type": "gaussian_mixture", "means": spec.means.tolist(), "tau": spec.tau,
                "weights": spec.weights.tolist()}
    if isinstance(spec, SparseGaussian):
        return {"type": "sparse_gaussian", "n": spec.n, "s": spec.s}
    if isinstance(spec, GenerativePushforward):
        out = {"type": "generative", "latent_dim": spec.latent_dim, "widths": list(spec.widths),
               "weight_seed": int(spec.weight_seed)}
        seeded = _generate_weights(spec.latent_dim, spec.widths, int(spec.weight_seed))
        if any(not np.array_equal(a, b) for a, b in zip(seeded, spec.weights)):
            out["weights"] = [w.tolist() for w in spec.weights]
        return out
    if isinstance(spec, PerturbedPrior):
        return {"type": "perturbed", "base": prior_to_dict(spec.base), "offsets": spec.offsets.tolist(),
                "eps": spec.eps}
    raise TypeError(f"unsupported prior {type(spec).__name__}")


def prior_from_dict(data, path: str = "") -> PriorSpec:
    if not isinstance(data, dict):
        raise ConfigError(path, "prior must be a JSON object")
    kind = data.get("type")
    if kind not in _PRIOR_KEYS:
        raise ConfigError(f"{path}/type", f"unknown prior type {kind!r}")
    unknown = set(data) - _PRIOR_KEYS[kind]
    if unknown:
        raise ConfigError(f"{path}/{sorted(unknown)[0]}", "unknown key")
    missing = _REQUIRED[kind] - set(data)
    if missing:
        raise ConfigError(f"{path}/{sorted(missing)[0]}", "missing required field")
    base = None
    if kind == "perturbed":
        base = prior_from_dict(data["base"], f"{path}/base")
        if not isinstance(base, DiracMixture):
            raise ConfigError(f"{path}/base", "base must be a dirac prior")
    try:
        if kind == "dirac":
            return DiracMixture(data["points"], data["weights"])
        if kind == "gaussian_mixture":
            return GaussianMixture(data["means"], data["tau"], data["weights"])
        if kind == "sparse_gaussian":
            return SparseGaussian(_as_int(data["n"], "/n"), _as_int(data["s"], "/s"))
        if kind == "generative":
            weights = data.get("weights")
            return GenerativePushforward(
                _as_int(data["latent_dim"], "/latent_dim"),
                tuple(data["widths"]),
                _as_int(data.get("weight_seed", 0), "/weight_seed"),
                tuple(weights) if weights is not None else None,
            )
        return PerturbedPrior(base, data["offsets"], data["eps"])
    except ConfigError as exc:
        raise exc.under(path) from None
    except (TypeError, ValueError) as exc:
        raise ConfigError(path, str(exc)) from None


def _as_int(value, path: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(path, f"expected an integer, got {value!r}")
    return value
