"""Verification suites behind ``brl verify``.

Each suite returns a list of JSON-ready check records with a boolean
``pass`` field. Monte Carlo checks of upper bounds pass when the data do not
refute the bound (the 99% Wilson lower limit stays below it). The extra field
``resolved`` tells whether the 99% upper limit also lies below the bound,
i.e. whether the sample was large enough to confirm it positively.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import bounds as bnd
from .concentration import (
    bernstein_orthog_bound,
    count_events,
    estimate_conc_mc,
    gaussian_exact_conc,
    norm_ratio_samples,
)
from .experiments import run_sweep, wilson_interval
from .noise import NoiseSpec, d_upp
from .numerics import RandomStream, as_generator
from .operators import Subgaussian, SubsampledOrthogonal, coherence_sparse, dense_operator, draw_operator
from .posterior import dirac_log_weights
from .presets import dirac16_gaussian
from .priors import DiracMixture

Z99 = 2.5758293035489004
SUITES = ("gauss-noise", "gaussian-conc", "orthog-conc", "separation", "tv-sep", "main-bound")


def _map(fn, cells, threads: int):
    if threads <= 1:
        return [fn(c) for c in cells]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, cells))


def _upper_bound_check(hits: int, total: int, bound: float) -> dict:
    low, high = wilson_interval(hits, total, Z99)
    return {
        "mc_estimate": hits / total,
        "wilson_low": low,
        "wilson_high": high,
        "pass": low <= bound,
        "resolved": high <= bound,
    }


# ---------------------------------------------------------------------------
# Suites
# ---------------------------------------------------------------------------


def noise_tail_check(sigma: float, m: int, t_ratio: float, draws: int, stream, dupp_scale: float = 1.0) -> dict:
    noise = NoiseSpec(sigma, m)
    t = t_ratio * sigma
    rng = as_generator(stream)
    hits = 0
    chunk = max(1, 2_000_000 // m)
    done = 0
    while done < draws:
        size = min(chunk, draws - done)
        e = math.sqrt(noise.variance) * rng.standard_normal((size, m))
        hits += int(np.count_nonzero(np.linalg.norm(e, axis=1) >= t))
        done += size
    bound = d_upp(noise, t) * dupp_scale
    out = {"check": "noise_tail", "sigma": sigma, "m": m, "t": t, "bound": bound, "draws": draws}
    out.update(_upper_bound_check(hits, draws, bound))
    return out


def suite_gauss_noise(seed: int, threads: int = 1, draws: int = 100_000, dupp_scale: float = 1.0) -> list:
    root = RandomStream(seed).child("gauss-noise")
    cells = [(s, m, r) for s in (0.5, 1.0) for m in (8, 64) for r in (1.2, 1.5, 2.0)]
    return _map(lambda c: noise_tail_check(*c, draws, root.child(*c), dupp_scale), cells, threads)


def gaussian_conc_check(t: float, m: int, n: int, n_x: int, n_A: int, stream) -> dict:
    side = "low" if t < 1 else "upp"
    exact = gaussian_exact_conc(t, m, side).value
    est = estimate_conc_mc(Subgaussian("gaussian"), m, n, lambda rng: rng.standard_normal(n), t, side, n_x, n_A, stream)
    se = math.sqrt(exact * (1 - exact) / n_A)
    return {
        "check": "gaussian_conc", "t": t, "m": m, "side": side, "exact": exact,
        "mc_estimate": est.value, "std_err": se, "n_x": n_x, "n_A": n_A,
        "pass": abs(est.value - exact) <= 3 * se,
    }


def suite_gaussian_conc(seed: int, threads: int = 1, n_A: int = 10_000, n: int = 32, n_x: int = 8) -> list:
    root = RandomStream(seed).child("gaussian-conc")
    cells = [(t, m) for t in (0.5, 0.9, 1.1, 2.0) for m in (4, 16, 64)]
    return _map(lambda c: gaussian_conc_check(c[0], c[1], n, n_x, n_A, root.child(*c)), cells, threads)


def sparse_directions(n: int, sparsity: int, count: int, rng) -> np.ndarray:
    dirs = np.zeros((count, n))
    for row in dirs:
        support = rng.choice(n, size=sparsity, replace=False)
        row[support] = rng.standard_normal(sparsity)
    return dirs


def orthog_conc_checks(m: int, n: int, s: int, n_dirs: int, n_A: int, stream, basis: str = "hadamard") -> list:
    mu = coherence_sparse(basis, n, s)
    dirs = sparse_directions(n, 2 * s, n_dirs, stream.child("directions").generator())
    ratios = norm_ratio_samples(SubsampledOrthogonal(basis), m, dirs, n_A, stream.child("operators"))
    out = []
    for t, side in ((0.5, "low"), (2.0, "upp")):
        bound = bernstein_orthog_bound(t, m, mu, side).value
        counts = count_events(ratios, t, side)[0]
        worst = int(counts.max())
        rec = {"check": "orthog_conc", "basis": basis, "t": t, "m": m, "side": side, "mu": mu, "bound": bound,
               "n_x": n_dirs, "n_A": n_A, "std_err": math.sqrt(worst / n_A * (1 - worst / n_A) / n_A)}
        rec.update(_upper_bound_check(worst, n_A, bound))
        rec["applicable"] = bound < 1
        if not rec["applicable"]:
            rec["pass"] = True
        out.append(rec)
    return out


def suite_orthog_conc(seed: int, threads: int = 1, n_A: int = 10_000) -> list:
    root = RandomStream(seed).child("orthog-conc")
    per_m = _map(lambda m: orthog_conc_checks(m, 256, 4, 20, n_A, root.child(m)), (64, 128), threads)
    return [rec for recs in per_m for rec in recs]


def separation_check(delta_param: float, trials: int, stream, n: int = 16, q: int = 8, sigma: float = 1.0) -> dict:
    """Two-atom prior, one fixed Gaussian A; joint frequency of (y* from atom i, x_hat from atom j)."""
    rng = as_generator(stream)
    op = dense_operator(rng.standard_normal((q, n)) / math.sqrt(q))
    noise = NoiseSpec(sigma, q)
    direction = rng.standard_normal(n)
    direction /= np.linalg.norm(direction)
    # Scale the second atom so that ||A(x1 - x2)|| sqrt(m) / sigma equals delta_param.
    scale = delta_param * sigma / (math.sqrt(q) * np.linalg.norm(op.apply(direction)))
    prior = DiracMixture.uniform(np.stack([np.zeros(n), scale * direction]))
    labels = rng.integers(0, 2, size=trials)
    ys = op.apply(prior.points[labels]) + math.sqrt(noise.variance) * rng.standard_normal((trials, q))
    p_second = np.exp(dirac_log_weights(prior, op, ys, noise)[:, 1])
    picks = (rng.random(trials) < p_second).astype(int)
    bound = 1.0 - bnd.tv_gaussian_shift(delta_param)
    out = {"check": "separation", "delta": delta_param, "trials": trials, "bound": bound, "pairs": []}
    ok = True
    for i, j in ((0, 1), (1, 0)):
        p_hat = float(np.mean((labels == i) & (picks == j)))
        se = math.sqrt(p_hat * (1 - p_hat) / trials)
        passed = p_hat <= bound + 3 * se
        ok &= passed
        out["pairs"].append({"i": i, "j": j, "mc_estimate": p_hat, "std_err": se, "pass": passed})
    out["pass"] = ok
    return out


def suite_separation(seed: int, threads: int = 1, trials: int = 100_000) -> list:
    root = RandomStream(seed).child("separation")
    return _map(lambda d: separation_check(d, trials, root.child(d)), (0.5, 1.0, 2.0, 4.0), threads)


def tv_sep_check(c: float, draws: int, stream, n: int = 32, m: int = 16, eta: float = 0.1, sigma: float = 0.5) -> dict:
    """Average TV between N(0, v I) and N(A x, v I), ||x|| = c (eta + sigma), against the lower bound."""
    rng = as_generator(stream)
    x = rng.standard_normal(n)
    x *= c * (eta + sigma) / np.linalg.norm(x)
    tvs = np.empty(draws)
    for k in range(draws):
        op = draw_operator(Subgaussian("gaussian"), m, n, rng)
        tvs[k] = bnd.tv_gaussian_shift(float(np.linalg.norm(op.apply(x))) * math.sqrt(m) / sigma)
    consts = bnd.tv_separation_gaussian_constants(c, sigma, m)
    bound = bnd.tv_separation_lower_bound(c, **consts)
    mean = float(tvs.mean())
    se = float(tvs.std(ddof=1) / math.sqrt(draws)) if draws > 1 else 0.0
    return {"check": "tv_separation", "c": c, "m": m, "draws": draws, "bound": bound, "mc_estimate": mean,
            "std_err": se, "pass": mean >= bound - 3 * se}


def suite_tv_sep(seed: int, threads: int = 1, draws: int = 1000) -> list:
    root = RandomStream(seed).child("tv-sep")
    return _map(lambda c: tv_sep_check(c, draws, root.child(c)), (4.0, 16.0), threads)


def main_bound_checks(report) -> list:
    out = []
    for row in report.rows:
        total = row.bound_total
        applicable = total is not None and total < 1
        slack = 3 * math.sqrt(total * (1 - total) / row.trials) if applicable else None
        out.append({
            "check": "main_bound", "m": row.m, "trials": row.trials, "failures": row.failures, "p_hat": row.p_hat,
            "bound": total, "slack": slack, "applicable": applicable,
            "pass": (not applicable) or row.p_hat <= total + slack,
        })
    return out


def suite_main_bound(seed: int, threads: int = 1, trials: int = 500, m_values=(10, 20, 40)) -> list:
    report = run_sweep(dirac16_gaussian(trials=trials, m_values=m_values, master_seed=seed), threads=threads)
    return main_bound_checks(report)


def run_suite(name: str, seed: int, threads: int = 1, corrupt_dupp: bool = False) -> list:
    if name == "gauss-noise":
        return suite_gauss_noise(seed, threads, dupp_scale=1e-6 if corrupt_dupp else 1.0)
    if name == "gaussian-conc":
        return suite_gaussian_conc(seed, threads)
    if name == "orthog-conc":
        return suite_orthog_conc(seed, threads)
    if name == "separation":
        return suite_separation(seed, threads)
    if name == "tv-sep":
        return suite_tv_sep(seed, threads)
    if name == "main-bound":
        return suite_main_bound(seed, threads)
    raise ValueError(f"unknown suite {name!r}; expected one of {SUITES}")
