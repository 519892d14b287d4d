import warnings

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from ardiag.core import ArdDataset
from ardiag.simulate import preset, simulate

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def make_dataset(y, covariates=None, names=None, **kw):
    y = np.asarray(y)
    n, K = y.shape
    if covariates is None:
        covariates, names = np.zeros((n, 0)), ()
    return ArdDataset(y=y, covariates=np.asarray(covariates, dtype=float),
                      covariate_names=tuple(names), group_names=tuple(f"G{k + 1}" for k in range(K)),
                      **kw)


@pytest.fixture(scope="session")
def sim1():
    return simulate(preset("sim1", seed=3))


@pytest.fixture(scope="session")
def sim2():
    return simulate(preset("sim2", seed=3))


@pytest.fixture(scope="session")
def sim4():
    return simulate(preset("sim4", seed=3))


@pytest.fixture(autouse=True)
def _quiet_fit_warnings():
    with warnings.catch_warnings():
        warnings.filterwarnings("ignore", category=UserWarning, module="ardiag")
        yield


ACCEPTANCE: dict = {}


def record(criterion: int, passed: bool, detail: str) -> None:
    ACCEPTANCE[criterion] = (passed, detail)
    print(f"criterion {criterion:>2}: {'PASS' if passed else 'FAIL'}  {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        passed, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:>2}: {'PASS' if passed else 'FAIL'}  {detail}")
