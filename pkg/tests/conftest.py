import math
import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from cmgauge.verify import load_corpus

settings.register_profile("default", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def corpus():
    return {e.name: e for e in load_corpus()}


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_hermitian_spins(rng, m, n, scale=0.4):
    """m Hermitian n x n matrices whose diagonals sum to zero over j."""
    X = (rng.normal(size=(m, n, n)) + 1j * rng.normal(size=(m, n, n))) * scale
    X = 0.5 * (X + np.conj(np.transpose(X, (0, 2, 1))))
    X[-1] -= np.diag(np.einsum("jaa->a", X))
    return X


PI = math.pi


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
