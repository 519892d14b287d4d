import numpy as np

from ardiag import families
from ardiag.fit import FittedModel


def oracle_model(truth, n_groups=None):
    """A FittedModel carrying the data-generating means."""
    mu = np.asarray(truth.mu, float)
    n, K = mu.shape
    omega = None if truth.family == families.POISSON else np.asarray(truth.omega, float)
    return FittedModel(family=truth.family, alpha=np.asarray(truth.alpha, float),
                       beta=np.asarray(truth.beta, float), global_coef=np.zeros(0),
                       local_coef=np.zeros((K, 0)), rg_coef=np.zeros(K), omega=omega,
                       mu_hat=mu, loglik=float("nan"), penalty_weight=0.0, converged=True,
                       iterations=0)


def model_from_mu(mu, family=families.POISSON, omega=None):
    mu = np.asarray(mu, float)
    n, K = mu.shape
    om = None if omega is None else np.broadcast_to(np.asarray(omega, float), (K,)).copy()
    return FittedModel(family=family, alpha=np.zeros(n), beta=np.zeros(K), global_coef=np.zeros(0),
                       local_coef=np.zeros((K, 0)), rg_coef=np.zeros(K), omega=om, mu_hat=mu,
                       loglik=float("nan"), penalty_weight=0.0, converged=True, iterations=0)
