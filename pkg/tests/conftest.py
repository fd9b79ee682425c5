import numpy as np
import pytest

from bellcal.algebra import CompositeState

S = 1 / np.sqrt(2)

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def phi_plus():
    """(i/sqrt2)(|00> + |11>), written out by hand."""
    return CompositeState(np.array([1j * S, 0, 0, 1j * S]))


@pytest.fixture
def psi_plus():
    """(i/sqrt2)(|01> + |10>), written out by hand."""
    return CompositeState(np.array([0, 1j * S, 1j * S, 0]))


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def random_state(rng) -> CompositeState:
    z = rng.normal(size=4) + 1j * rng.normal(size=4)
    return CompositeState(z / np.linalg.norm(z))


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
