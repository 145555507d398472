import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from kmlearn.model import ObservationSet, toy_model

settings.register_profile(
    "default",
    deadline=None,
    max_examples=60,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")

# acceptance results, printed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


TOY_P = np.array([[0.3, 0.5], [0.1, 0.2]])


@pytest.fixture
def toy():
    return toy_model()


@pytest.fixture
def toy_obs():
    return ObservationSet.from_matrix(TOY_P)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_pmf(rng, D, n=None):
    E = rng.standard_exponential((D,) if n is None else (n, D))
    return E / E.sum(axis=-1, keepdims=True)
