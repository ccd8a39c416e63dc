import numpy as np
import pytest

from relerr.data import Dataset

#: one status line per acceptance criterion, echoed after the test run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def random_dataset(rng, n=30, p=3, beta=None, law=None):
    """Dataset with standard normal covariates and log-normal-ish errors."""
    x = np.hstack([np.ones((n, 1)), rng.standard_normal((n, p - 1))])
    if beta is None:
        beta = rng.uniform(-1, 1, p)
    if law is None:
        eps = np.exp(0.5 * rng.standard_normal(n))
    else:
        from relerr.distributions import Sampler
        eps = Sampler(law).draw(rng, n)
    y = np.exp(x @ np.asarray(beta)) * eps
    return Dataset(x, y), np.asarray(beta, dtype=float)


@pytest.fixture
def rng():
    return np.random.default_rng(20130501)
