import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line[1])


def random_rational_weights(rng, n, q):
    """Positive weights on the 1/q grid summing to one (needs n <= q)."""
    cuts = np.sort(rng.choice(np.arange(1, q), size=n - 1, replace=False))
    return np.diff(np.concatenate([[0], cuts, [q]])) / q


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
