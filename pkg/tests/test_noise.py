import math

import numpy as np
import pytest
from scipy import integrate

from brl.experiments import wilson_interval
from brl.noise import NoiseSpec, d_shift, d_upp, draw_noise, log_density
from brl.numerics import RandomStream

Z99 = 2.5758293035489004


def test_draw_noise_variance():
    spec = NoiseSpec(2.0, 4)
    e = draw_noise(spec, 10**6, RandomStream(1))
    assert abs(e.var() - 1.0) <= 4 * math.sqrt(2) / 1000


def test_draw_noise_scale_equivariance():
    a = draw_noise(NoiseSpec(1.0, 5), 100, RandomStream(2))
    b = draw_noise(NoiseSpec(2.0, 5), 100, RandomStream(2))
    np.testing.assert_allclose(b, 2 * a)
    np.testing.assert_array_equal(a, draw_noise(NoiseSpec(1.0, 5), 100, RandomStream(2)))


def test_d_upp_examples():
    assert d_upp(NoiseSpec(1.0, 2), 1.0) == 1.0
    assert d_upp(NoiseSpec(1.0, 2), 0.5) == 1.0
    assert d_upp(NoiseSpec(1.0, 2), 2.0) == pytest.approx(4 * math.exp(-3), rel=1e-14)
    assert 4 * math.exp(-3) == pytest.approx(0.199148, abs=1e-6)


def test_d_upp_strictly_decreasing():
    spec = NoiseSpec(0.7, 9)
    ts = np.linspace(0.71, 3.0, 200)
    vals = [d_upp(spec, t) for t in ts]
    assert all(b < a for a, b in zip(vals, vals[1:]))


@pytest.mark.parametrize("m", [8, 64])
def test_d_upp_dominates_monte_carlo(m):
    # every grid point where the bound is resolvable at this sample size
    spec = NoiseSpec(1.0, m)
    rng = np.random.default_rng(m)
    e = math.sqrt(spec.variance) * rng.standard_normal((10**5, m))
    norms = np.linalg.norm(e, axis=1)
    for ratio in (1.2, 1.5, 2.0):
        bound = d_upp(spec, ratio)
        low, high = wilson_interval(int(np.sum(norms >= ratio)), len(norms), Z99)
        assert low <= bound


def test_d_shift_examples():
    assert d_shift(NoiseSpec(1.0, 2), 0.0, 5.0) == 1.0
    assert d_shift(NoiseSpec(1.0, 2), 1.0, 1.0) == pytest.approx(math.exp(3), rel=1e-14)
    with pytest.raises(ValueError):
        d_shift(NoiseSpec(1.0, 2), -1.0, 0.0)


def test_d_shift_dominates_density_ratio():
    spec = NoiseSpec(0.8, 6)
    tau, eps = 0.9, 0.3
    bound = math.log(d_shift(spec, eps, tau))
    rng = np.random.default_rng(3)
    worst = -np.inf
    for _ in range(10_000):
        u = rng.standard_normal(6)
        u *= tau * rng.random() ** (1 / 6) / np.linalg.norm(u)
        w = rng.standard_normal(6)
        w *= eps * rng.random() ** (1 / 6) / np.linalg.norm(w)
        v = u - w
        worst = max(worst, log_density(spec, u) - log_density(spec, v))
    assert worst <= bound + 1e-9
    # the extreme feasible pair attains the bound
    u = np.zeros(6)
    u[0] = tau
    v = u.copy()
    v[0] = tau + eps
    assert log_density(spec, u) - log_density(spec, v) == pytest.approx(bound, rel=1e-12)


def test_log_density_examples():
    assert log_density(NoiseSpec(1.0, 1), [0.0]) == pytest.approx(-0.5 * math.log(2 * math.pi))
    spec = NoiseSpec(1.3, 7)
    e = np.array([0.2, -0.4, 0.1])
    assert log_density(spec, e) - log_density(spec, np.zeros(3)) == pytest.approx(-(7 / (2 * 1.3**2)) * e @ e)
    total, _ = integrate.quad(lambda u: math.exp(log_density(spec, [u])), -10, 10)
    assert total == pytest.approx(1.0, abs=1e-6)


def test_noise_spec_validation():
    with pytest.raises(ValueError):
        NoiseSpec(0.0, 1)
    with pytest.raises(ValueError):
        NoiseSpec(1.0, 0)
    assert NoiseSpec(2.0, 8).variance == 0.5
    assert NoiseSpec(2.0, 8).precision_factor == 2.0


def test_d_shift_overflow_is_infinite():
    assert d_shift(NoiseSpec(0.25, 17), 1.5, 1.0) == math.inf
