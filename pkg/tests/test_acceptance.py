"""Acceptance criteria 1-11, each at its stated tolerance.

Every test records a one-line verdict (see the terminal summary) before
asserting, so a failing criterion still reports its numbers.
"""

import itertools
import json
import math
import time

import numpy as np
import pytest

from _acceptance_log import record
from _oracles import brute_force_cover
from brl import verify
from brl.cli import main
from brl.config import serialize_config
from brl.covering import (
    analytic_cov_gaussian,
    analytic_cov_lipschitz,
    analytic_cov_sparse,
    exact_cover_dirac,
    mixture_cov_bound,
)
from brl.experiments import run_sweep, wilson_interval
from brl.noise import NoiseSpec
from brl.numerics import RandomStream
from brl.operators import dense_operator
from brl.posterior import posterior_gaussian_mixture, sample_posterior
from brl.presets import dirac16_gaussian, phase_transition, sparse_coherence
from brl.priors import DiracMixture, GaussianMixture

SEED = 20240601
Z99 = 2.5758293035489004


def _elapsed(start):
    return time.perf_counter() - start


def test_criterion_01_gaussian_noise_tail():
    start = time.perf_counter()
    root = RandomStream(SEED).child("criterion-1")
    bad = []
    for sigma, m, ratio in itertools.product((0.5, 1.0), (8, 64), (1.2, 1.5, 2.0)):
        rec = verify.noise_tail_check(sigma, m, ratio, 10**5, root.child(sigma, m, ratio))
        if not rec["wilson_high"] <= rec["bound"]:
            bad.append(f"(sigma={sigma}, m={m}, t={ratio}sigma: hits={rec['mc_estimate']:.2e}, "
                       f"wilson99_high={rec['wilson_high']:.2e} > d_upp={rec['bound']:.2e})")
    secs = _elapsed(start)
    ok = not bad and secs < 10
    record(1, ok, f"{12 - len(bad)}/12 grid points with Wilson 99% upper <= d_upp, {secs:.1f}s"
           + (f"; unresolved: {', '.join(bad)}" if bad else ""))
    assert ok


def test_criterion_02_gaussian_concentration_exactness():
    start = time.perf_counter()
    checks = verify.suite_gaussian_conc(SEED, threads=4)
    worst = max(abs(c["mc_estimate"] - c["exact"]) / c["std_err"] if c["std_err"] else 0.0 for c in checks)
    secs = _elapsed(start)
    ok = all(c["pass"] for c in checks) and secs < 30
    record(2, ok, f"{sum(c['pass'] for c in checks)}/{len(checks)} cells within 3 SE "
           f"(worst {worst:.2f} SE), {secs:.1f}s")
    assert ok


def test_criterion_03_bernstein_dominance():
    start = time.perf_counter()
    root = RandomStream(SEED).child("criterion-3")
    recs = [r for m in (64, 128) for r in verify.orthog_conc_checks(m, 256, 4, 20, 10_000, root.child(m))]
    applicable = [r for r in recs if r["bound"] < 1]
    bad = [r for r in applicable if not r["wilson_high"] <= r["bound"]]
    secs = _elapsed(start)
    ok = not bad and secs < 60
    detail = ", ".join(f"(m={r['m']}, t={r['t']}: wilson99_high={r['wilson_high']:.2e} > bound={r['bound']:.2e})"
                       for r in bad)
    record(3, ok, f"{len(applicable) - len(bad)}/{len(applicable)} applicable checks with Wilson 99% upper <= "
           f"Bernstein bound, {secs:.1f}s" + (f"; unresolved: {detail}" if bad else ""))
    assert ok


def test_criterion_04_separation_bound():
    start = time.perf_counter()
    checks = verify.suite_separation(SEED, threads=4)
    secs = _elapsed(start)
    ok = all(c["pass"] for c in checks) and secs < 30
    margins = [pair["mc_estimate"] - c["bound"] for c in checks for pair in c["pairs"]]
    record(4, ok, f"{sum(c['pass'] for c in checks)}/4 deltas pass, max(p_hat - bound) = {max(margins):+.4f}, {secs:.1f}s")
    assert ok


def test_criterion_05_tv_separation():
    start = time.perf_counter()
    checks = verify.suite_tv_sep(SEED)
    secs = _elapsed(start)
    ok = all(c["pass"] for c in checks) and secs < 30
    record(5, ok, "; ".join(f"c={c['c']:g}: mean TV {c['mc_estimate']:.4f} vs bound {c['bound']:.4f}" for c in checks)
           + f", {secs:.1f}s")
    assert ok


def test_criterion_06_main_bound_dominance():
    start = time.perf_counter()
    report = run_sweep(dirac16_gaussian(trials=2000, master_seed=SEED), threads=8)
    checks = verify.main_bound_checks(report)
    applicable = [c for c in checks if c["applicable"]]
    secs = _elapsed(start)
    ok = bool(applicable) and all(c["pass"] for c in checks) and secs < 300
    record(6, ok, f"{sum(c['pass'] for c in applicable)}/{len(applicable)} m values with total < 1 satisfy "
           f"p_hat <= total + 3 SE (m={[c['m'] for c in applicable]}), {secs:.1f}s")
    assert ok


def _first_m_below(j, threshold=0.1, m_max=40):
    for m in range(1, m_max + 1):
        row = run_sweep(phase_transition(j, trials=2000, m_values=(m,), master_seed=SEED), threads=8).rows[0]
        if row.p_hat < threshold:
            return m
    return None


def test_criterion_07_phase_transition_scaling():
    start = time.perf_counter()
    firsts = {j: _first_m_below(j) for j in (4, 16, 64)}
    secs = _elapsed(start)
    vals = [firsts[j] for j in (4, 16, 64)]
    ok = None not in vals and vals == sorted(vals) and vals[2] <= 3 * vals[0] and secs < 300
    record(7, ok, f"smallest m with p_hat < 0.1: {firsts}, ratio "
           f"{(vals[2] / vals[0]) if None not in vals else float('nan'):.2f}, {secs:.1f}s")
    assert ok


def test_criterion_08_coherence_ordering():
    start = time.perf_counter()
    rows = {b: run_sweep(sparse_coherence(b, trials=2000, m=60, master_seed=SEED), threads=8).rows[0]
            for b in ("identity", "hadamard")}
    secs = _elapsed(start)
    ident, had = rows["identity"], rows["hadamard"]
    n, s, m = 256, 4, 60
    # P(at least one support coordinate is never sampled), by inclusion-exclusion
    miss = sum((-1) ** (k + 1) * math.comb(s, k) * (1 - m / n) ** k for k in range(1, s + 1))
    se = math.sqrt(ident.p_hat * (1 - ident.p_hat) / ident.trials)
    ordered = had.p_hat < ident.p_hat and had.wilson_high < ident.wilson_low
    floor = ident.p_hat >= miss - 3 * se
    ok = ordered and floor and secs < 180
    record(8, ok, f"p_hat hadamard={had.p_hat:.4f} [{had.wilson_low:.4f}, {had.wilson_high:.4f}], identity="
           f"{ident.p_hat:.4f} [{ident.wilson_low:.4f}, {ident.wilson_high:.4f}], miss floor {miss:.4f}, {secs:.1f}s")
    assert ok


def test_criterion_09_covering_formulas():
    start = time.perf_counter()
    t_half = 1 + math.sqrt(2 * math.log(1 / math.exp(-0.5)))  # 2
    formula_cases = [
        (analytic_cov_lipschitz(1, 1.0, 2.0, math.exp(-0.5)), math.log(1 + 2 * 1 * 1 * t_half / 2)),
        (analytic_cov_lipschitz(3, 0.0, 1.0, 0.1), 0.0),
        (analytic_cov_sparse(16, 2, 2 * math.sqrt(2), math.exp(-1)), 2 * math.log(24 * math.e)),
        (analytic_cov_sparse(5, 5, 1.0, 0.3), 5 + 5 * math.log(1 + 2 * math.sqrt(5) * (1 + math.sqrt(2 / 5 * math.log(1 / 0.3))))),
        (analytic_cov_gaussian(1, 1.0, 4.0, math.exp(-0.5)), math.log(2)),
        (analytic_cov_gaussian(3, 0.0, 1.0, 0.2), 0.0),
        (mixture_cov_bound([5]), 5),
        (mixture_cov_bound([2, 3]), 5),
    ]
    formulas_ok = all(abs(got - want) <= 1e-12 for got, want in formula_cases)
    rng = np.random.default_rng(SEED)
    mismatches = 0
    for _ in range(50):
        k = int(rng.integers(1, 11))
        pts = rng.uniform(0, 3, size=(k, int(rng.integers(1, 4))))
        w = rng.dirichlet(np.ones(k))
        prior = DiracMixture(pts, w / w.sum())
        eta = float(rng.uniform(0.2, 1.5))
        delta = float(rng.choice([0.0, 0.05, 0.2, 0.4]))
        if exact_cover_dirac(prior, eta, delta) != brute_force_cover(pts, prior.weights, eta, delta):
            mismatches += 1
    secs = _elapsed(start)
    ok = formulas_ok and mismatches == 0 and secs < 10
    record(9, ok, f"{sum(abs(g - w) <= 1e-12 for g, w in formula_cases)}/{len(formula_cases)} formula pins, "
           f"{50 - mismatches}/50 exact covers match brute force, {secs:.1f}s")
    assert ok


def test_criterion_10_conjugate_posterior_moments():
    start = time.perf_counter()
    rng = np.random.default_rng(SEED)
    n, q, draws = 32, 16, 10**5
    # close components and loud noise keep all three posterior weights non-negligible
    prior = GaussianMixture(0.1 * rng.standard_normal((3, n)), 0.7, [0.2, 0.3, 0.5])
    a = rng.standard_normal((q, n)) / math.sqrt(q)
    noise = NoiseSpec(3.0, q)
    x = prior.means[2] + prior.tau * rng.standard_normal(n)
    y = a @ x + math.sqrt(noise.variance) * rng.standard_normal(q)
    post = posterior_gaussian_mixture(prior, dense_operator(a), y, noise)
    samples = sample_posterior(post, RandomStream(SEED, 10), size=draws)
    mean, cov = post.mean(), post.covariance()
    var = np.diag(cov)
    mean_z = np.abs(samples.mean(axis=0) - mean) / np.sqrt(var / draws)
    centered = samples - mean
    sq = centered**2
    var_z = np.abs(sq.mean(axis=0) - var) / (sq.std(axis=0, ddof=1) / math.sqrt(draws))
    secs = _elapsed(start)
    worst = max(mean_z.max(), var_z.max())
    ok = worst <= 4 and secs < 30
    record(10, ok, f"posterior weights {np.round(post.weights, 3).tolist()}, worst mean z={mean_z.max():.2f}, "
           f"worst variance z={var_z.max():.2f} (limit 4), {secs:.1f}s")
    assert ok


def test_criterion_11_thread_determinism(tmp_path, capsys):
    start = time.perf_counter()
    cfg_path = tmp_path / "dirac16.json"
    cfg_path.write_text(serialize_config(dirac16_gaussian(trials=300, m_values=(10, 20, 40), master_seed=SEED)))
    outputs = {}
    for threads in (1, 8):
        out_json = tmp_path / f"run{threads}.json"
        out_csv = tmp_path / f"run{threads}.csv"
        assert main(["run", "--config", str(cfg_path), "--out", str(out_json), "--csv", str(out_csv),
                     "--threads", str(threads)]) == 0
        runs = out_json.read_bytes() + out_csv.read_bytes()
        verdicts = b""
        for suite in ("gauss-noise", "orthog-conc", "main-bound"):
            main(["verify", "--suite", suite, "--seed", str(SEED), "--threads", str(threads)])
            verdicts += capsys.readouterr().out.encode("utf-8")
        outputs[threads] = (runs, verdicts)
    secs = _elapsed(start)
    same_run = outputs[1][0] == outputs[8][0]
    same_verify = outputs[1][1] == outputs[8][1]
    ok = same_run and same_verify and secs < 60
    record(11, ok, f"run bytes identical={same_run}, verify bytes identical={same_verify} "
           f"(1 vs 8 threads), {secs:.1f}s")
    assert ok
