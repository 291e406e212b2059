import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "repo",
    deadline=None,
    max_examples=25,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("repo")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_symplectic(rng, n, steps=3):
    """Product of symplectic Euler transition matrices with random SPD blocks."""
    from modwave.integrators import symplectic_euler_step

    out = np.eye(2 * n)
    for _ in range(steps):
        a = rng.normal(size=(n, n))
        k = a @ a.T / n + 0.1 * np.eye(n)
        minv = np.diag(rng.uniform(0.5, 2.0, n))
        h = rng.uniform(0.05, 0.4)
        step = symplectic_euler_step(np.eye(2 * n), 0.0, h, lambda t: minv, lambda t: k)
        out = step @ out
    return out


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance") or __import__("sys").modules.get("tests.test_acceptance")
    lines = sorted(getattr(mod, "RESULTS", []))
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in lines:
            terminalreporter.write_line(line)
