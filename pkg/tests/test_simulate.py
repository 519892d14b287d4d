import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ardiag import families
from ardiag.simulate import (DEGREE, GROUP, SimulationSpec, contrast_pattern, degree_sigma,
                             empirical_moments, group_sigma, preset, replicate_seed, simulate)


def test_unit_means():
    spec = SimulationSpec(50, 4, families.POISSON, alpha_mean=np.log(5), alpha_sd=0.0,
                          beta=np.full(4, np.log(0.2)))
    _, truth = simulate(spec)
    np.testing.assert_allclose(truth.mu, 1.0, rtol=1e-12)


def test_seed_determinism():
    a, ta = simulate(preset("sim3", seed=9))
    b, tb = simulate(preset("sim3", seed=9))
    c, _ = simulate(preset("sim3", seed=10))
    assert a.equals(b) and np.array_equal(ta.mu, tb.mu)
    assert not np.array_equal(a.y, c.y)


def test_preset_shapes():
    s1 = preset("sim1")
    assert s1.family == families.POISSON and s1.p_total == 6
    assert s1.active_local == {"X3", "X6"} and s1.active_global == {"X5"}
    s2 = preset("sim2")
    assert s2.family == families.NEGBIN and s2.correlation == GROUP and s2.p_total == 0
    s3 = preset("sim3")
    assert s3.family == families.NEGBIN and s3.correlation == DEGREE
    assert len(s3.active_local) == 1 and len(s3.active_global) == 2
    s4 = preset("sim4")
    assert s4.family == families.POISSON and s4.correlation == GROUP
    assert len(s4.active_local | s4.active_global) == 4
    t = preset("typei", n=100, K=10, family="poisson")
    assert (t.n, t.K, t.p_total, t.correlation) == (100, 10, 0, "none")
    with pytest.raises(ValueError):
        preset("sim9")


def test_mean_counts_span():
    _, truth = simulate(preset("typei", n=4000, K=10, seed=1))
    means = truth.mu.mean(0)
    assert 0.4 < means.min() < 0.8 and 6 < means.max() < 11


def test_spec_validation():
    with pytest.raises(ValueError):
        SimulationSpec(10, 3, families.NEGBIN)
    with pytest.raises(ValueError):
        SimulationSpec(10, 3, p_total=2, local_coef={1: 0.5}, global_coef={1: 0.5})
    with pytest.raises(ValueError):
        SimulationSpec(10, 3, p_total=2, global_coef={3: 0.5})
    with pytest.raises(ValueError):
        SimulationSpec(10, 2, correlation=GROUP, sigma=np.array([[1.0, 2.0], [2.0, 1.0]]))


def test_moments_poisson_and_nb():
    spec = SimulationSpec(100_000, 1, families.POISSON, alpha_mean=np.log(4), alpha_sd=0.0,
                          beta=np.zeros(1), seed=2)
    d, t = simulate(spec)
    assert empirical_moments(d, t)[0]["variance"] == pytest.approx(4.0, abs=0.1)
    d, t = simulate(SimulationSpec(100_000, 1, families.NEGBIN, alpha_mean=np.log(4), alpha_sd=0.0,
                                   beta=np.zeros(1), omega=1.0, seed=3))
    row = empirical_moments(d, t)[0]
    assert row["variance"] == pytest.approx(20.0, abs=1.0)
    assert row["model_variance"] == pytest.approx(20.0, abs=1e-9)
    d, t = simulate(SimulationSpec(1000, 1, families.POISSON, alpha_mean=-15, alpha_sd=0.0,
                                   beta=np.zeros(1)))
    assert empirical_moments(d, t)[0]["variance"] == 0.0


def test_group_correlation_matches_sigma():
    _, t = simulate(preset("sim4", n=10_000, K=8, seed=4))
    S = group_sigma(8)
    target = S / np.sqrt(np.outer(np.diag(S), np.diag(S)))
    assert np.max(np.abs(np.corrcoef(t.b.T) - target)) < 0.05


def test_degree_correlation_matches_sigma():
    _, t = simulate(preset("sim3", n=10_000, K=8, seed=5))
    S = degree_sigma(8)
    target = S[0, 1:] / np.sqrt(S[0, 0] * np.diag(S)[1:])
    emp = [np.corrcoef(t.alpha, t.b[:, k])[0, 1] for k in range(8)]
    assert np.max(np.abs(np.array(emp) - target)) < 0.05


@given(st.integers(2, 40))
def test_sigmas_psd(K):
    assert np.linalg.eigvalsh(group_sigma(K)).min() > 0
    assert np.linalg.eigvalsh(degree_sigma(K)).min() > -1e-12
    assert set(contrast_pattern(K)) <= {-1.0, 1.0}


def test_binomial_mode():
    spec = SimulationSpec(200, 3, "binomial", alpha_mean=np.log(50), beta=np.log([0.01, 0.05, 0.1]))
    d, t = simulate(spec)
    assert d.y.min() >= 0 and np.all(t.mu > 0)


def test_replicate_seeds_distinct():
    seeds = {replicate_seed(0, r) for r in range(1000)}
    assert len(seeds) == 1000
    assert replicate_seed(3, 7) == replicate_seed(3, 7)


def test_truth_json():
    _, t = simulate(preset("sim1", n=20, K=4))
    d = json.loads(t.to_json())
    assert set(d["local_coef"]) == {"X3", "X6"} and d["global_coef"] == {"X5": 0.5}
