import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from stokesdn import PeriodicFunction

settings.register_profile(
    "default", deadline=None, max_examples=25, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


def random_periodic(rng, K, d=1, n_modes=None, scale=1.0, kmax=None):
    """Real trigonometric polynomial with random coefficients."""
    kmax = K if kmax is None else min(kmax, K)
    c = np.zeros((2 * K + 1,) * d, dtype=complex)
    sl = tuple(slice(K - kmax, K + kmax + 1) for _ in range(d))
    shape = (2 * kmax + 1,) * d
    c[sl] = scale * (rng.normal(size=shape) + 1j * rng.normal(size=shape))
    c = 0.5 * (c + np.conj(c[(slice(None, None, -1),) * d]))
    return PeriodicFunction(c)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


# criterion number -> (title, passed, detail); filled by test_acceptance
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        title, ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {title}  [{detail}]")
