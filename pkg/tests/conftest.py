import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_primitive(rng, n, dim):
    """Admissible primitive states (rho, v, p) with |v| well below 1."""
    rho = rng.uniform(0.5, 2.0, (n, 1))
    v = rng.uniform(-0.8, 0.8, (n, dim))
    p = rng.uniform(0.5, 2.0, (n, 1))
    return np.concatenate([rho, v, p], axis=1)


def random_unit(rng, n, dim):
    v = rng.normal(size=(n, dim))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def pytest_terminal_summary(terminalreporter):
    """Repeat the acceptance verdict lines at the end of the run."""
    import sys

    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "VERDICTS", None)
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for line in lines:
        terminalreporter.write_line(line)
