import dataclasses
import math

import numpy as np
import pytest
from scipy import optimize

from brl.errors import ConfigError
from brl.experiments import (
    CSV_COLUMNS,
    BoundSettings,
    ExperimentConfig,
    bound_for_m,
    log_cover_estimate,
    run_sweep,
    run_trial,
    wilson_interval,
)
from brl.operators import Subgaussian, SubsampledOrthogonal
from brl.presets import dirac16_gaussian, simplex_atoms
from brl.priors import DiracMixture, GaussianMixture, PerturbedPrior, SparseGaussian

Z95 = 1.959963984540054


def _config(**kw):
    base = dict(
        real_prior=DiracMixture.uniform([[0.0, 0.0, 0.0, 0.0], [100.0, 0.0, 0.0, 0.0]]),
        operator=SubsampledOrthogonal("identity"),
        sigma=0.01,
        m_values=(4,),
        threshold_factor=34.0,
        eta=0.1,
        trials=1000,
    )
    base.update(kw)
    return ExperimentConfig(**base)


def test_single_point_prior_never_fails():
    cfg = _config(real_prior=DiracMixture.uniform([[1.0, 2.0, 3.0, 4.0]]), sigma=1e-6, trials=1)
    res = run_trial(cfg, 4, 0)
    assert res.error_norm == 0.0 and not res.failed
    row = run_sweep(cfg).rows[0]
    assert row.p_hat == 0.0 and row.wilson_low == 0.0


def test_well_separated_pair_rarely_fails():
    report = run_sweep(_config())
    assert report.rows[0].p_hat < 0.01


def test_trial_determinism():
    cfg = _config(operator=Subgaussian("gaussian"), sigma=50.0)
    assert run_trial(cfg, 3, 17) == run_trial(cfg, 3, 17)


def test_wilson_examples():
    low, high = wilson_interval(50, 100, 1.96)
    assert low == pytest.approx(0.4038, abs=1e-3)
    assert high == pytest.approx(0.5962, abs=1e-3)
    # endpoints solve the score equation |p - p_hat| = z sqrt(p (1 - p) / n)
    score = lambda p: (p - 0.5) ** 2 - 1.96**2 * p * (1 - p) / 100  # noqa: E731
    assert low == pytest.approx(optimize.brentq(score, 0.0, 0.5), abs=1e-12)
    assert high == pytest.approx(optimize.brentq(score, 0.5, 1.0), abs=1e-12)
    assert wilson_interval(0, 10)[0] == 0.0
    assert wilson_interval(10, 10)[1] == 1.0
    widths = [np.subtract(*wilson_interval(n // 4, n)[::-1]) for n in (40, 400, 4000)]
    assert widths[0] > widths[1] > widths[2]
    with pytest.raises(ValueError):
        wilson_interval(3, 2)


def test_perturbed_coupling_gap():
    base = DiracMixture.uniform(simplex_atoms(3, 4, 5.0))
    offsets = np.zeros((3, 4))
    offsets[:, 3] = [0.01, 0.02, 0.03]
    cfg = _config(real_prior=PerturbedPrior(base, offsets, 0.03), model_prior=base, trials=200,
                  operator=Subgaussian("gaussian"), sigma=0.5, m_values=(3,))
    for i in range(50):
        res = run_trial(cfg, 3, i)
        assert res.coupling_gap is not None and res.coupling_gap <= 0.03 + 1e-15
    assert run_sweep(cfg).rows[0].max_coupling_gap <= 0.03 + 1e-15


def test_exact_mode_rejects_unsupported_prior():
    with pytest.raises(ConfigError) as info:
        _config(real_prior=SparseGaussian(4, 1))
    assert info.value.path == "/posterior_mode"


def test_config_validation_paths():
    with pytest.raises(ConfigError, match="trials"):
        _config(trials=0)
    with pytest.raises(ConfigError) as info:
        _config(m_values=(4, 0))
    assert info.value.path == "/m_values/1"
    with pytest.raises(ConfigError):
        _config(m_values=(5,))


def test_gaussian_mixture_pipeline_runs():
    prior = GaussianMixture(np.zeros((2, 6)) + [[0.0], [3.0]], 0.5, [0.5, 0.5])
    cfg = _config(real_prior=prior, operator=Subgaussian("gaussian"), m_values=(3, 6), trials=20, sigma=0.5)
    rep = run_sweep(cfg)
    assert [r.m for r in rep.rows] == [3, 6]
    for r in rep.rows:
        assert r.wilson_low <= r.p_hat <= r.wilson_high
        assert r.failures <= r.trials


def test_thread_invariance():
    cfg = _config(operator=Subgaussian("gaussian"), sigma=3.0, m_values=(2, 3), trials=64)
    assert run_sweep(cfg, 1).to_json() == run_sweep(cfg, 4).to_json()
    assert run_sweep(cfg, 1).to_csv() == run_sweep(cfg, 4).to_csv()


def test_csv_columns_frozen():
    cfg = _config(trials=3)
    header = run_sweep(cfg).to_csv().splitlines()[0]
    assert header.split(",") == list(CSV_COLUMNS)


def test_bound_attachment_and_cover():
    cfg = dirac16_gaussian(trials=1, m_values=(60,))
    assert log_cover_estimate(cfg.model, cfg.eta, cfg.bound.delta) == pytest.approx(math.log(16))
    b = bound_for_m(cfg, 60)
    assert b["k"] == pytest.approx(math.log(16))
    assert b["threshold"] == pytest.approx(34 * 0.55)
    assert b["total"] < 0.01
    assert bound_for_m(dataclasses.replace(cfg, operator=Subgaussian("rademacher")), 60) is None
    assert bound_for_m(dataclasses.replace(cfg, bound_mode="none"), 60) is None


def test_bound_for_m_explicit_k_and_subsampled():
    prior = SparseGaussian(64, 2)
    cfg = ExperimentConfig(real_prior=prior, operator=SubsampledOrthogonal("hadamard"), sigma=0.1, m_values=(32,),
                           threshold_factor=34.0, eta=0.1, trials=1, posterior_mode="sparse_support",
                           bound_mode="theorem_main", bound=BoundSettings(k=2.0))
    b = bound_for_m(cfg, 32)
    assert b["k"] == 2.0 and b["mu"] == pytest.approx(4.0)
    assert b["term_c_abs"] == 0.0


@pytest.mark.slow
def test_dirac16_p_hat_nonincreasing():
    rep = run_sweep(dirac16_gaussian(trials=300, m_values=(5, 10, 15, 20, 30)), threads=4)
    rows = rep.rows
    for a, b in zip(rows, rows[1:]):
        # a later p_hat above an earlier one must still overlap it
        assert b.p_hat <= a.p_hat or b.wilson_low <= a.wilson_high
