import numpy as np
import pytest

from sphlab import generate_irregular, generate_regular


@pytest.fixture(scope="session")
def lattice_100():
    return generate_regular(100)


@pytest.fixture(scope="session")
def jittered_400():
    return generate_irregular(400, 0.45, seed=3)


def seeded_sets(count=20, sizes=(100, 144, 196, 256, 400)):
    """Deterministic mix of lattices and jittered lattices."""
    out = []
    for i in range(count):
        N = sizes[i % len(sizes)]
        if i % 4 == 0:
            out.append(generate_regular(N))
        else:
            out.append(generate_irregular(N, 0.1 + 0.3 * (i % 3) / 2, seed=1000 + i))
    return out


def rng(seed=0):
    return np.random.default_rng(seed)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
