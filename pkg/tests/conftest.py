import numpy as np
import pytest

from energymeasure.fieldio import SampledField


def random_field(seed=0, n=2, N=16, T=3, L=2 * np.pi, pressure=False):
    rng = np.random.default_rng(seed)
    times = np.sort(rng.uniform(-1, 0, T))
    vel = rng.standard_normal((T, n) + (N,) * n)
    pres = rng.standard_normal((T,) + (N,) * n) if pressure else None
    return SampledField(n, (N,) * n, L, times, vel, pres, {"seed": seed})


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, appended by tests/test_acceptance.py
ACCEPTANCE: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[key])
