import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from subbranch.model import HeavyTail, MigrationLaw, ModelConfig, PointMass, PoissonUnit

settings.register_profile("pkg", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("pkg")

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split(".")[0].split()[-1])):
            terminalreporter.write_line(line)


def migration(p, q=None, ind=1):
    q = 1.0 - p if q is None else q
    return MigrationLaw(p, q, 0.0, PointMass(0), PointMass(ind), PointMass(0))


@pytest.fixture(scope="session")
def c1():
    return ModelConfig(PoissonUnit(), migration(0.5))


@pytest.fixture(scope="session")
def c2():
    return ModelConfig(PoissonUnit(), migration(0.25))


@pytest.fixture(scope="session")
def c3(c2):
    return c2.replace(initial=HeavyTail(0.7, 1.0))


@pytest.fixture
def rng():
    return np.random.default_rng(20261015)


def within(est, target, se, k):
    """``|est - target| <= k * se`` with a readable failure message."""
    assert abs(est - target) <= k * se, f"{est} vs {target}: {abs(est - target) / se:.2f} SE"
