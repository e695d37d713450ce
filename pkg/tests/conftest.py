import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", max_examples=25, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def equicorrelation(d, r):
    rho = np.full((d, d), float(r))
    np.fill_diagonal(rho, 1.0)
    return rho


def random_correlation(d, seed):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((d, d + 3))
    c = a @ a.T
    s = np.sqrt(np.diag(c))
    c = c / np.outer(s, s)
    np.fill_diagonal(c, 1.0)
    return c


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE):
            terminalreporter.write_line(line)
