import numpy as np
import pytest

from clickgbs.conformance import random_state


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture(scope="session")
def state3():
    return random_state(3, 11)


def physical_kernel_A(N, seed):
    """Reduced kernel of a random physical state on ``N`` modes."""
    from clickgbs.gaussian import kernel

    return kernel(random_state(N, seed)).A


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(RESULTS):
        ok, detail = RESULTS[n]
        terminalreporter.write_line(f"ACCEPTANCE {n}: {'PASS' if ok else 'FAIL'} ({detail})")
