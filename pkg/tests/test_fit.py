import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra import numpy as hnp

from ardiag import families
from ardiag.core import CovariateSpec
from ardiag.fit import (FitConfig, FittedModel, fit, load_model, log_likelihood,
                        model_from_dict, predict_mu)
from ardiag.simulate import SimulationSpec, simulate
from conftest import make_dataset


def independence_fit(y):
    y = np.asarray(y, float)
    return np.outer(y.sum(1), y.sum(0)) / y.sum()


positive_counts = hnp.arrays(np.int64, st.tuples(st.integers(2, 12), st.integers(2, 6)),
                             elements=st.integers(0, 30)).filter(
    lambda y: (y.sum(1) > 0).all() and (y.sum(0) > 0).all())


def test_two_by_two_closed_form():
    m = fit(make_dataset([[1, 2], [3, 4]]))
    np.testing.assert_allclose(m.mu_hat, [[1.2, 1.8], [2.8, 4.2]], rtol=1e-8)
    assert m.converged


def test_constant_counts():
    m = fit(make_dataset(np.full((5, 3), 4)))
    np.testing.assert_allclose(m.mu_hat, 4.0, rtol=1e-10)


@given(positive_counts)
def test_margins_match(y):
    m = fit(make_dataset(y))
    np.testing.assert_allclose(m.mu_hat.sum(1), y.sum(1), rtol=1e-6)
    np.testing.assert_allclose(m.mu_hat.sum(0), y.sum(0), rtol=1e-6)
    np.testing.assert_allclose(m.mu_hat, independence_fit(y), rtol=1e-6)


@given(positive_counts)
def test_beta_anchor_and_stored_mu(y):
    d = make_dataset(y, known_group_sizes=np.arange(1, y.shape[1] + 1) * 10.0,
                     total_population=1e4)
    m = fit(d)
    assert np.mean(m.beta) == pytest.approx(d.beta_anchor(), abs=1e-10)
    np.testing.assert_allclose(predict_mu(m, d), m.mu_hat, rtol=1e-12)


def test_predict_mu_examples():
    d = make_dataset([[1, 1], [1, 1]])
    m = fit(d)
    zero = FittedModel(families.POISSON, np.zeros(2), np.zeros(2), np.zeros(0), np.zeros((2, 0)),
                       np.zeros(2), None, np.ones((2, 2)), 0.0, 0.0, True, 1)
    np.testing.assert_array_equal(predict_mu(zero, d), 1.0)
    six = FittedModel(families.POISSON, np.full(2, np.log(2)), np.full(2, np.log(3)), np.zeros(0),
                      np.zeros((2, 0)), np.zeros(2), None, np.ones((2, 2)), 0.0, 0.0, True, 1)
    np.testing.assert_allclose(predict_mu(six, d), 6.0)
    assert m.mu_hat.shape == (2, 2)


def test_log_likelihood_cells():
    d = make_dataset([[0, 2], [0, 2]])
    m = FittedModel(families.POISSON, np.zeros(2), np.zeros(2), np.zeros(0), np.zeros((2, 0)),
                    np.zeros(2), None, np.array([[1.0, 2.0], [1.0, 2.0]]), 0.0, 0.0, True, 1)
    assert log_likelihood(m, d) == pytest.approx(2 * (-1.0 + np.log(2) - 2), abs=1e-12)


def test_aliasing_shift_leaves_mu():
    rng = np.random.default_rng(0)
    d = make_dataset(rng.poisson(3, (30, 4)))
    m = fit(d)
    shifted = FittedModel(**{**m.__dict__, "alpha": m.alpha + 0.7, "beta": m.beta - 0.7})
    np.testing.assert_allclose(predict_mu(shifted, d), m.mu_hat, rtol=1e-8)


def covariate_data(seed=0, n=300, K=6, family="poisson"):
    spec = SimulationSpec(n, K, family, p_total=3, local_coef={1: 0.4 * (-1.0) ** np.arange(K)},
                          global_coef={3: 0.3}, alpha_mean=np.log(40), omega=2.0 if family == "negbin" else None,
                          seed=seed)
    return simulate(spec)


def test_poisson_trace_monotone_with_penalty():
    d, _ = covariate_data(1)
    m = fit(d, FitConfig(covariates=CovariateSpec(local={"X1"}, global_={"X3"}), penalty_weight=0.5))
    tr = np.array(m.trace)
    assert np.all(np.diff(tr) >= -1e-8 * np.abs(tr[1:]))
    assert m.converged


def test_recovers_covariate_effects():
    d, truth = covariate_data(2, n=2000)
    m = fit(d, FitConfig(covariates=CovariateSpec(local={"X1"}, global_={"X3"})))
    assert m.global_coef[0] == pytest.approx(0.3, abs=0.05)
    lc = m.local_coef[:, 0]
    true = truth.local_coef["X1"]
    # the common shift of local slopes is not identified separately from the degree
    np.testing.assert_allclose(lc - lc.mean(), true - true.mean(), atol=0.08)


def test_nb_fixed_large_omega_matches_poisson():
    d, _ = covariate_data(3)
    spec = CovariateSpec(local={"X1"}, global_={"X3"})
    p = fit(d, FitConfig(covariates=spec))
    nb = fit(d, FitConfig(family="negbin", covariates=spec, fixed_omega=1e8))
    np.testing.assert_allclose(nb.mu_hat, p.mu_hat, rtol=1e-4)


def test_omega_recovery():
    spec = SimulationSpec(2000, 10, "negbin", alpha_mean=np.log(60), alpha_sd=0.3,
                          beta=np.linspace(np.log(2), np.log(8), 10) - np.log(60), omega=5.0, seed=11)
    d, _ = simulate(spec)
    m = fit(d, FitConfig(family="negbin"))
    assert np.all(np.abs(m.omega / 5.0 - 1) < 0.3), m.omega


def test_all_zero_row_is_clamped():
    d = make_dataset([[0, 0, 0], [1, 2, 3], [4, 1, 0], [2, 2, 2]])
    m = fit(d)
    assert m.clamped_respondents == (0,)
    assert np.all(m.mu_hat[0] < 1e-6)
    assert np.all(np.isfinite(m.mu_hat)) and np.all(m.mu_hat > 0)


def test_constant_covariate_rejected():
    d = make_dataset([[1, 2], [3, 4], [2, 2]], [[1.0], [1.0], [1.0]], ["c"])
    with pytest.raises(ValueError):
        fit(d, FitConfig(covariates=CovariateSpec(global_={"c"})))


def test_json_round_trip(tmp_path):
    d, _ = covariate_data(4, family="negbin")
    m = fit(d, FitConfig(family="negbin", covariates=CovariateSpec(local={"X1"}, global_={"X3"})))
    path = tmp_path / "m.json"
    m.to_json(path)
    back = load_model(path, d)
    np.testing.assert_allclose(back.mu_hat, m.mu_hat, rtol=1e-12)
    np.testing.assert_allclose(back.omega, m.omega)
    assert back.config == m.config


def test_config_validation():
    with pytest.raises(ValueError):
        FitConfig(family="gamma")
    with pytest.raises(ValueError):
        FitConfig(penalty_weight=-1)
    with pytest.raises(ValueError):
        FitConfig(omega_bounds=(2.0, 1.0))
